//! Query access models: exact evaluation queries and single-shot ±1 sample
//! queries driven by a shared stack of uniform random numbers.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::circuit::{ExpectationFn, ShiftedProductFunction};
use crate::error::{check_dim, invalid, Result};
use crate::game::PlateauRegion;
use crate::torus::{GridShift, TorusPoint, GRID};

/// Uniform on `[0, 1)` from the top 53 bits of a word.
fn unit_from_bits(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum Source {
    Seeded(ChaCha8Rng),
    Scripted(VecDeque<f64>),
}

/// A deterministic stream of uniforms on `[-1, 1)`.
///
/// Draw `k` of a seeded stack depends only on `(seed, stream, k)`: the
/// generator is ChaCha8 keyed by the seed with the stream id as its nonce.
#[derive(Clone, Debug)]
pub struct RandomStack {
    seed: u64,
    stream: u64,
    draw_index: u64,
    source: Source,
}

impl RandomStack {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            draw_index: 0,
            source: Source::Seeded(rng),
        }
    }

    /// A stack that pops the given values in order, then panics.
    pub fn scripted(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            seed: 0,
            stream: 0,
            draw_index: 0,
            source: Source::Scripted(values.into_iter().collect()),
        }
    }

    /// Random access to draw `k` of a seeded stream.
    pub fn draw_at(seed: u64, stream: u64, k: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng.set_word_pos(2 * k as u128);
        2.0 * unit_from_bits(rng.next_u64()) - 1.0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of values popped so far.
    pub fn draw_index(&self) -> u64 {
        self.draw_index
    }

    /// Pops the next uniform on `[-1, 1)`.
    pub fn pop(&mut self) -> f64 {
        self.draw_index += 1;
        match &mut self.source {
            Source::Seeded(rng) => 2.0 * unit_from_bits(rng.next_u64()) - 1.0,
            Source::Scripted(values) => values
                .pop_front()
                .expect("scripted random stack exhausted"),
        }
    }

    /// Pops a uniform on `[0, 1)`.
    pub fn pop_unit(&mut self) -> f64 {
        (self.pop() + 1.0) / 2.0
    }

    /// A coin with probability `p_heads` of returning true.
    pub fn coin(&mut self, p_heads: f64) -> bool {
        self.pop() < 2.0 * p_heads - 1.0
    }

    /// Uniform integer in `0..k`.
    pub fn pop_index(&mut self, k: usize) -> usize {
        ((self.pop_unit() * k as f64) as usize).min(k - 1)
    }

    /// A uniform point of the n-torus, one pop per coordinate.
    pub fn pop_point(&mut self, n: usize) -> TorusPoint {
        TorusPoint::new((0..n).map(|_| self.pop_unit()).collect::<Vec<_>>())
    }

    /// A uniform grid shift, one pop per coordinate.
    pub fn pop_shift(&mut self, n: usize) -> GridShift {
        let trits: Vec<u8> = (0..n).map(|_| self.pop_index(GRID as usize) as u8).collect();
        GridShift::new(trits).expect("trits drawn below GRID")
    }
}

/// A single ±1 measurement result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn value(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }

    pub fn from_sign(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(invalid(format!("outcome must be ±1, got {other}"))),
        }
    }

    /// `+1` iff `r < threshold`.
    pub fn from_threshold(r: f64, threshold: f64) -> Self {
        if r < threshold {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

/// Query points and ±1 results in query order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<(TorusPoint, Outcome)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: TorusPoint, outcome: Outcome) {
        self.entries.push((x, outcome));
    }

    pub fn entries(&self) -> &[(TorusPoint, Outcome)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_point(&self, x: &TorusPoint) -> bool {
        self.entries.iter().any(|(p, _)| p.bits_eq(x))
    }

    /// Bitwise equality of points and outcomes.
    pub fn bits_eq(&self, other: &Transcript) -> bool {
        self.len() == other.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((p, a), (q, b))| a == b && p.bits_eq(q))
    }
}

/// `base` outside the plateau region, the constant `eta` inside it.
#[derive(Clone, Debug)]
pub struct ClampedFunction {
    base: ShiftedProductFunction,
    region: PlateauRegion,
    eta: f64,
}

impl ClampedFunction {
    pub fn base(&self) -> &ShiftedProductFunction {
        &self.base
    }

    pub fn region(&self) -> &PlateauRegion {
        &self.region
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl ExpectationFn for ClampedFunction {
    fn dim(&self) -> usize {
        self.base.n()
    }

    fn value_unchecked(&self, x: &TorusPoint) -> f64 {
        if self.region.contains_unchecked(x) {
            self.eta
        } else {
            self.base.value_unchecked(x)
        }
    }
}

pub fn clamp_to_plateau(
    base: ShiftedProductFunction,
    region: PlateauRegion,
    eta: f64,
) -> Result<ClampedFunction> {
    check_dim(base.n(), region.n())?;
    if !(-1.0..=1.0).contains(&eta) {
        return Err(invalid(format!("eta = {eta} is outside [-1, 1]")));
    }
    Ok(ClampedFunction { base, region, eta })
}

/// Exact value of `f(x)`; consumes no randomness.
pub fn eval_query<F: ExpectationFn + ?Sized>(f: &F, x: &TorusPoint) -> Result<f64> {
    f.value(x)
}

/// One circuit run: pops `R` and answers `+1` iff `R < f(x)`.
pub fn sample_query<F: ExpectationFn + ?Sized>(
    f: &F,
    x: &TorusPoint,
    stack: &mut RandomStack,
) -> Result<Outcome> {
    let v = f.value(x)?;
    Ok(Outcome::from_threshold(stack.pop(), v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledOutcome {
    pub out_f: Outcome,
    pub out_fbar: Outcome,
    pub diverged: bool,
}

/// Answers the same query for two functions from a single popped `R`.
pub fn coupled_sample<F, G>(f: &F, fbar: &G, x: &TorusPoint, shared: &mut RandomStack) -> Result<CoupledOutcome>
where
    F: ExpectationFn + ?Sized,
    G: ExpectationFn + ?Sized,
{
    let a = f.value(x)?;
    let b = fbar.value(x)?;
    let r = shared.pop();
    let out_f = Outcome::from_threshold(r, a);
    let out_fbar = Outcome::from_threshold(r, b);
    Ok(CoupledOutcome {
        out_f,
        out_fbar,
        diverged: out_f != out_fbar,
    })
}
