//! Information carried by queries about the hidden family member.
//!
//! Evaluation queries: one exact value at a random point singles out the
//! shift. Sample queries: the posterior over all `3^n` shifts is tracked
//! exactly, and mutual information is estimated by averaging exact
//! conditional entropies over simulated transcripts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{family_values, ExpectationFn, ShiftedProductFunction};
use crate::error::{check_dim, invalid, LabError, Result};
use crate::game::StrategyKind;
use crate::oracle::{sample_query, Outcome, RandomStack};
use crate::torus::{GridShift, TorusPoint};

/// Largest `n` for which transcript MI estimation is allowed.
pub const MI_MAX_N: usize = 8;

/// Result of matching one exact evaluation against the whole family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Identification {
    Unique { shift: GridShift, argmax: TorusPoint },
    Ambiguous(Vec<GridShift>),
}

/// Scans the family for members whose value at `x` is within `tol` of the
/// oracle's answer.
pub fn identify_at(
    n: usize,
    oracle: &dyn ExpectationFn,
    x: &TorusPoint,
    tol: f64,
) -> Result<Identification> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    check_dim(n, oracle.dim())?;
    let value = oracle.value(x)?;
    let matches: Vec<GridShift> = family_values(x)?
        .iter()
        .enumerate()
        .filter(|(_, v)| (*v - value).abs() <= tol)
        .map(|(i, _)| GridShift::from_index(n, i))
        .collect();
    match matches.len() {
        0 => Err(LabError::Inconsistent(format!(
            "value {value} at {:?} matches no family member",
            x.coords()
        ))),
        1 => {
            let shift = matches.into_iter().next().expect("one match");
            let argmax = ShiftedProductFunction::new(shift.clone())?.argmax();
            Ok(Identification::Unique { shift, argmax })
        }
        _ => Ok(Identification::Ambiguous(matches)),
    }
}

/// One evaluation query at a uniformly random point, then table lookup.
pub fn omnipotent_identify(
    n: usize,
    oracle: &dyn ExpectationFn,
    point_source: &mut RandomStack,
    tol: f64,
) -> Result<Identification> {
    let x = point_source.pop_point(n);
    identify_at(n, oracle, &x, tol)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifyReport {
    pub trials: usize,
    pub unique_correct: usize,
    pub unique_wrong: usize,
    pub ambiguous: usize,
}

impl IdentifyReport {
    pub fn rate(&self) -> f64 {
        self.unique_correct as f64 / self.trials as f64
    }
}

/// Trial `t` draws its hidden shift and query point from stream `t`.
pub fn identification_trials(n: usize, trials: usize, tol: f64, seed: u64) -> Result<IdentifyReport> {
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stack = RandomStack::new(seed, t as u64);
            let f = ShiftedProductFunction::new(stack.pop_shift(n))?;
            Ok(match omnipotent_identify(n, &f, &mut stack, tol)? {
                Identification::Unique { shift, .. } if &shift == f.shift() => 0,
                Identification::Unique { .. } => 1,
                Identification::Ambiguous(_) => 2,
            })
        })
        .collect::<Result<Vec<u8>>>()?;
    let count = |k| outcomes.iter().filter(|&&o| o == k).count();
    Ok(IdentifyReport {
        trials,
        unique_correct: count(0),
        unique_wrong: count(1),
        ambiguous: count(2),
    })
}

/// Shannon entropy in bits, with `0·log 0 = 0`.
pub fn entropy_bits(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// A distribution over the `3^n` shifts, indexed like [`GridShift::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    n: usize,
    probs: Vec<f64>,
}

impl Posterior {
    pub fn uniform(n: usize) -> Result<Self> {
        let total = GridShift::count(n)?;
        Ok(Self { n, probs: vec![1.0 / total as f64; total] })
    }

    pub fn from_probs(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_dim(GridShift::count(n)?, probs.len())?;
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p.is_nan() || p < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("probabilities must be nonnegative and sum to 1"));
        }
        Ok(Self { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, a: &GridShift) -> f64 {
        self.probs[a.index()]
    }

    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// Probability of `outcome` at a point whose family values are `values`.
    fn predictive(&self, values: &[f64], outcome: Outcome) -> f64 {
        let o = outcome.as_f64();
        self.probs.iter().zip(values).map(|(p, v)| p * (1.0 + o * v) / 2.0).sum()
    }

    fn update_with_values(&self, values: &[f64], outcome: Outcome) -> Result<Posterior> {
        let o = outcome.as_f64();
        let mut probs: Vec<f64> = self
            .probs
            .iter()
            .zip(values)
            .map(|(p, v)| p * (1.0 + o * v) / 2.0)
            .collect();
        let total: f64 = probs.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(LabError::Inconsistent(
                "observation has zero likelihood under every candidate".into(),
            ));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Posterior { n: self.n, probs })
    }

    /// Bayes update with likelihood `(1 + outcome·f_a(x)) / 2`.
    pub fn update(&self, x: &TorusPoint, outcome: Outcome) -> Result<Posterior> {
        check_dim(self.n, x.dim())?;
        self.update_with_values(&family_values(x)?, outcome)
    }
}

pub fn posterior_update(prior: &Posterior, x: &TorusPoint, outcome: Outcome) -> Result<Posterior> {
    prior.update(x, outcome)
}

/// Mutual information between the hidden shift and a sample transcript of
/// fixed query points, by exact enumeration of all `2^m` outcome sequences.
pub fn exact_transcript_mi(n: usize, points: &[TorusPoint]) -> Result<f64> {
    fn expected_entropy(post: &Posterior, rest: &[Vec<f64>]) -> Result<f64> {
        let Some((values, tail)) = rest.split_first() else {
            return Ok(post.entropy_bits());
        };
        let mut acc = 0.0;
        for o in [Outcome::Plus, Outcome::Minus] {
            let p = post.predictive(values, o);
            if p > 0.0 {
                acc += p * expected_entropy(&post.update_with_values(values, o)?, tail)?;
            }
        }
        Ok(acc)
    }
    let prior = Posterior::uniform(n)?;
    let values = points
        .iter()
        .map(|x| {
            check_dim(n, x.dim())?;
            family_values(x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(prior.entropy_bits() - expected_entropy(&prior, &values)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiRow {
    pub m: usize,
    pub mi_bits: f64,
    pub stderr: f64,
    /// `mi / (m · n · log2 3)`; zero at `m = 0`.
    pub per_query_ratio: f64,
}

/// Mutual information `I(C : transcript)` after every prefix `0..=m`.
///
/// Transcript `t` uses stream `t` of `seed`: first the hidden shift, then the
/// strategy's draws interleaved with one draw per sample query.
pub fn transcript_mi_profile(
    n: usize,
    strategy: &StrategyKind,
    m: usize,
    transcripts: usize,
    seed: u64,
) -> Result<Vec<MiRow>> {
    if n > MI_MAX_N {
        return Err(invalid(format!("n = {n} exceeds the posterior cap of {MI_MAX_N}")));
    }
    if transcripts < 1 {
        return Err(invalid("transcripts must be at least 1"));
    }
    strategy.build(n)?;
    let prior = Posterior::uniform(n)?;
    let h0 = prior.entropy_bits();
    let gains = (0..transcripts)
        .into_par_iter()
        .map(|t| {
            let mut stack = RandomStack::new(seed, t as u64);
            let f = ShiftedProductFunction::new(stack.pop_shift(n))?;
            let mut bob = strategy.build(n)?;
            let mut post = prior.clone();
            let mut gains = Vec::with_capacity(m + 1);
            gains.push(0.0);
            for q in 1..=m {
                let x = bob.next_query(q, &mut stack);
                let o = sample_query(&f, &x, &mut stack)?;
                post = post.update(&x, o)?;
                gains.push(h0 - post.entropy_bits());
            }
            Ok(gains)
        })
        .collect::<Result<Vec<_>>>()?;
    let denom = transcripts as f64;
    let unit = n as f64 * 3f64.log2();
    Ok((0..=m)
        .map(|k| {
            let mean = gains.iter().map(|g| g[k]).sum::<f64>() / denom;
            let var = if transcripts > 1 {
                gains.iter().map(|g| (g[k] - mean).powi(2)).sum::<f64>() / (denom - 1.0)
            } else {
                0.0
            };
            MiRow {
                m: k,
                mi_bits: mean,
                stderr: (var / denom).sqrt(),
                per_query_ratio: if k == 0 { 0.0 } else { mean / (k as f64 * unit) },
            }
        })
        .collect())
}

/// `I(C : transcript)` after `m` queries, with its standard error.
pub fn transcript_mi(
    n: usize,
    strategy: &StrategyKind,
    m: usize,
    transcripts: usize,
    seed: u64,
) -> Result<MiRow> {
    Ok(transcript_mi_profile(n, strategy, m, transcripts, seed)?
        .pop()
        .expect("profile has m + 1 rows"))
}
