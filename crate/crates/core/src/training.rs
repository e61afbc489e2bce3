//! Training algorithms that see the target only through sample queries, and
//! the harness that counts their queries.
//!
//! The harness, not the trainer, decides success: after every query it checks
//! `f(x) >= 1 - alpha` with the exact function, free of charge. A trainer
//! therefore succeeds exactly when it happens to query a good point.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{ExpectationFn, ShiftedProductFunction};
use crate::error::{invalid, Result};
use crate::game::{cdf_table, delta, p_exact, CdfRow, PlateauRegion};
use crate::oracle::{clamp_to_plateau, sample_query, Outcome, RandomStack, Transcript};
use crate::torus::{GridShift, TorusPoint};

/// SPSA gain constants: `a_k = A_GAIN / (k + STABILITY)^0.602`, `c_k = C_GAIN / k^0.101`.
pub const SPSA_A_GAIN: f64 = 0.2;
pub const SPSA_C_GAIN: f64 = 0.1;
pub const SPSA_STABILITY: f64 = 10.0;
pub const SPSA_ALPHA: f64 = 0.602;
pub const SPSA_GAMMA: f64 = 0.101;

/// Parameter-shift offset (quarter period) and ascent step.
pub const PSHIFT_OFFSET: f64 = 0.25;
pub const PSHIFT_STEP: f64 = 0.1;

/// `1 - 2δ(n)`; only positive for `n >= 4`.
pub fn default_alpha(n: usize) -> Result<f64> {
    let alpha = 1.0 - 2.0 * delta(n);
    if alpha <= 0.0 {
        return Err(invalid(format!(
            "default alpha = 1 - 2·(2/3)^(n/2) = {alpha:.4} is not positive for n = {n}; use n >= 4"
        )));
    }
    Ok(alpha)
}

/// FNV-1a over 64-bit words.
#[derive(Clone, Copy)]
struct StateHasher(u64);

impl StateHasher {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn word(mut self, w: u64) -> Self {
        for b in w.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
        self
    }

    fn reals(self, xs: &[f64]) -> Self {
        xs.iter().fold(self, |h, x| h.word(x.to_bits()))
    }
}

/// A training algorithm driven one sample query at a time.
pub trait Trainer: Send {
    /// The next query point; coin flips are popped from `stack`.
    fn propose(&mut self, stack: &mut RandomStack) -> TorusPoint;

    /// Result of the query just proposed.
    fn observe(&mut self, outcome: Outcome);

    /// The point the trainer would output now, if any.
    fn candidate(&self) -> Option<TorusPoint>;

    /// Digest of the full internal state.
    fn state_digest(&self) -> u64;
}

/// Uniform random points; outputs the latest point that answered `+1`.
pub struct RandomSearch {
    n: usize,
    last: Option<TorusPoint>,
    best: Option<TorusPoint>,
    plus: u64,
    steps: u64,
}

impl RandomSearch {
    pub fn new(n: usize) -> Self {
        Self { n, last: None, best: None, plus: 0, steps: 0 }
    }
}

impl Trainer for RandomSearch {
    fn propose(&mut self, stack: &mut RandomStack) -> TorusPoint {
        let x = stack.pop_point(self.n);
        self.last = Some(x.clone());
        x
    }

    fn observe(&mut self, outcome: Outcome) {
        self.steps += 1;
        if outcome == Outcome::Plus {
            self.plus += 1;
            self.best = self.last.clone();
        }
    }

    fn candidate(&self) -> Option<TorusPoint> {
        self.best.clone().or_else(|| self.last.clone())
    }

    fn state_digest(&self) -> u64 {
        let mut h = StateHasher::new().word(self.plus).word(self.steps);
        for p in [&self.last, &self.best].into_iter().flatten() {
            h = h.reals(p.coords());
        }
        h.0
    }
}

#[derive(Clone, Debug)]
enum SpsaPhase {
    Ready,
    AwaitPlus { delta: Vec<f64> },
    HavePlus { delta: Vec<f64>, y_plus: f64 },
    AwaitMinus { delta: Vec<f64>, y_plus: f64 },
}

/// Simultaneous-perturbation stochastic approximation (ascent), two sample
/// queries per iterate with Rademacher perturbations.
pub struct Spsa {
    n: usize,
    x: Option<Vec<f64>>,
    k: u64,
    phase: SpsaPhase,
}

impl Spsa {
    pub fn new(n: usize) -> Self {
        Self { n, x: None, k: 1, phase: SpsaPhase::Ready }
    }

    fn gains(&self) -> (f64, f64) {
        let k = self.k as f64;
        (
            SPSA_A_GAIN / (k + SPSA_STABILITY).powf(SPSA_ALPHA),
            SPSA_C_GAIN / k.powf(SPSA_GAMMA),
        )
    }

    fn offset(&self, delta: &[f64], sign: f64) -> TorusPoint {
        let (_, c) = self.gains();
        let x = self.x.as_ref().expect("initialized before use");
        TorusPoint::new(x.iter().zip(delta).map(|(x, d)| x + sign * c * d).collect::<Vec<_>>())
    }
}

impl Trainer for Spsa {
    fn propose(&mut self, stack: &mut RandomStack) -> TorusPoint {
        if self.x.is_none() {
            self.x = Some(stack.pop_point(self.n).coords().to_vec());
        }
        match std::mem::replace(&mut self.phase, SpsaPhase::Ready) {
            SpsaPhase::Ready => {
                let delta: Vec<f64> = (0..self.n)
                    .map(|_| if stack.coin(0.5) { 1.0 } else { -1.0 })
                    .collect();
                let x = self.offset(&delta, 1.0);
                self.phase = SpsaPhase::AwaitPlus { delta };
                x
            }
            SpsaPhase::HavePlus { delta, y_plus } => {
                let x = self.offset(&delta, -1.0);
                self.phase = SpsaPhase::AwaitMinus { delta, y_plus };
                x
            }
            other => panic!("propose called twice without observe ({other:?})"),
        }
    }

    fn observe(&mut self, outcome: Outcome) {
        let y = outcome.as_f64();
        self.phase = match std::mem::replace(&mut self.phase, SpsaPhase::Ready) {
            SpsaPhase::AwaitPlus { delta } => SpsaPhase::HavePlus { delta, y_plus: y },
            SpsaPhase::AwaitMinus { delta, y_plus } => {
                let (a, c) = self.gains();
                let scale = a * (y_plus - y) / (2.0 * c);
                let x = self.x.as_mut().expect("initialized before use");
                for (xi, d) in x.iter_mut().zip(&delta) {
                    *xi += scale * d;
                }
                let wrapped = TorusPoint::new(x.clone());
                *x = wrapped.coords().to_vec();
                self.k += 1;
                SpsaPhase::Ready
            }
            other => panic!("observe called without a pending query ({other:?})"),
        };
    }

    fn candidate(&self) -> Option<TorusPoint> {
        self.x.as_ref().map(|x| TorusPoint::new(x.clone()))
    }

    fn state_digest(&self) -> u64 {
        let mut h = StateHasher::new().word(self.k);
        if let Some(x) = &self.x {
            h = h.reals(x);
        }
        h = match &self.phase {
            SpsaPhase::Ready => h.word(0),
            SpsaPhase::AwaitPlus { delta } => h.word(1).reals(delta),
            SpsaPhase::HavePlus { delta, y_plus } => h.word(2).reals(delta).word(y_plus.to_bits()),
            SpsaPhase::AwaitMinus { delta, y_plus } => h.word(3).reals(delta).word(y_plus.to_bits()),
        };
        h.0
    }
}

/// Gradient ascent with parameter-shift estimates: `∂_j f = π (f(x + e_j/4) - f(x - e_j/4))`,
/// each term estimated by one sample.
pub struct ParamShiftAscent {
    n: usize,
    x: Option<Vec<f64>>,
    grad: Vec<f64>,
    coord: usize,
    /// `Some(y)` once the `+` shifted sample for `coord` is in.
    y_plus: Option<f64>,
    pending: bool,
}

impl ParamShiftAscent {
    pub fn new(n: usize) -> Self {
        Self { n, x: None, grad: vec![0.0; n], coord: 0, y_plus: None, pending: false }
    }
}

impl Trainer for ParamShiftAscent {
    fn propose(&mut self, stack: &mut RandomStack) -> TorusPoint {
        assert!(!self.pending, "propose called twice without observe");
        if self.x.is_none() {
            self.x = Some(stack.pop_point(self.n).coords().to_vec());
        }
        let mut p = self.x.clone().expect("initialized above");
        p[self.coord] += if self.y_plus.is_none() { PSHIFT_OFFSET } else { -PSHIFT_OFFSET };
        self.pending = true;
        TorusPoint::new(p)
    }

    fn observe(&mut self, outcome: Outcome) {
        assert!(self.pending, "observe called without a pending query");
        self.pending = false;
        let y = outcome.as_f64();
        match self.y_plus.take() {
            None => self.y_plus = Some(y),
            Some(y_plus) => {
                self.grad[self.coord] = PI * (y_plus - y);
                self.coord += 1;
                if self.coord == self.n {
                    self.coord = 0;
                    let x = self.x.as_mut().expect("initialized before use");
                    for (xi, g) in x.iter_mut().zip(&self.grad) {
                        *xi += PSHIFT_STEP * g;
                    }
                    *x = TorusPoint::new(x.clone()).coords().to_vec();
                }
            }
        }
    }

    fn candidate(&self) -> Option<TorusPoint> {
        self.x.as_ref().map(|x| TorusPoint::new(x.clone()))
    }

    fn state_digest(&self) -> u64 {
        let mut h = StateHasher::new()
            .word(self.coord as u64)
            .word(self.pending as u64)
            .word(self.y_plus.map_or(u64::MAX, f64::to_bits))
            .reals(&self.grad);
        if let Some(x) = &self.x {
            h = h.reals(x);
        }
        h.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrainerKind {
    RandomSearch,
    Spsa,
    ParamShift,
}

impl TrainerKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "random" | "random_search" => Ok(Self::RandomSearch),
            "spsa" => Ok(Self::Spsa),
            "pshift" | "pshift_gd" => Ok(Self::ParamShift),
            other => Err(invalid(format!("unknown training algorithm '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RandomSearch => "random",
            Self::Spsa => "spsa",
            Self::ParamShift => "pshift",
        }
    }

    pub fn build(self, n: usize) -> Box<dyn Trainer> {
        match self {
            Self::RandomSearch => Box::new(RandomSearch::new(n)),
            Self::Spsa => Box::new(Spsa::new(n)),
            Self::ParamShift => Box::new(ParamShiftAscent::new(n)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerResult {
    pub algo: TrainerKind,
    pub n: usize,
    pub hidden: GridShift,
    /// Sample queries performed, including a final query of the output point.
    pub queries_total: usize,
    /// 1-based index of the first query outside the hidden plateau.
    pub first_exit: Option<usize>,
    pub output: Option<TorusPoint>,
    pub succeeded: bool,
    pub budget: usize,
    pub transcript: Transcript,
}

fn validate(alpha: f64, budget: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid(format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if budget < 1 {
        return Err(invalid("budget must be at least 1"));
    }
    Ok(())
}

/// Trains against `target` itself.
pub fn run_trainer(
    kind: TrainerKind,
    target: &ShiftedProductFunction,
    alpha: f64,
    budget: usize,
    stack: &mut RandomStack,
) -> Result<TrainerResult> {
    let mut trainer = kind.build(target.n());
    let mut result = run_trainer_with(trainer.as_mut(), target, target, alpha, budget, stack)?;
    result.algo = kind;
    Ok(result)
}

/// Samples from `sampler`, judges success against `truth`.
///
/// After the budget runs out the trainer's candidate is queried once more if
/// it was never queried, so the output is always a queried point.
pub fn run_trainer_with(
    trainer: &mut dyn Trainer,
    sampler: &dyn ExpectationFn,
    truth: &ShiftedProductFunction,
    alpha: f64,
    budget: usize,
    stack: &mut RandomStack,
) -> Result<TrainerResult> {
    validate(alpha, budget)?;
    let n = truth.n();
    crate::error::check_dim(n, sampler.dim())?;
    let region = PlateauRegion::new(truth.shift().clone());
    let threshold = 1.0 - alpha;
    let mut transcript = Transcript::new();
    let mut first_exit = None;
    let mut output = None;

    let mut record = |x: TorusPoint, o: Outcome, transcript: &mut Transcript| -> Result<bool> {
        let q = transcript.len() + 1;
        if first_exit.is_none() && !region.contains(&x)? {
            first_exit = Some(q);
        }
        let hit = truth.value(&x)? >= threshold;
        if hit {
            output = Some(x.clone());
        }
        transcript.push(x, o);
        Ok(hit)
    };

    let mut succeeded = false;
    for _ in 0..budget {
        let x = trainer.propose(stack);
        let o = sample_query(sampler, &x, stack)?;
        trainer.observe(o);
        if record(x, o, &mut transcript)? {
            succeeded = true;
            break;
        }
    }
    if !succeeded {
        if let Some(c) = trainer.candidate() {
            if !transcript.contains_point(&c) {
                let o = sample_query(sampler, &c, stack)?;
                succeeded = record(c, o, &mut transcript)?;
            }
        }
    }
    Ok(TrainerResult {
        algo: TrainerKind::RandomSearch,
        n,
        hidden: truth.shift().clone(),
        queries_total: transcript.len(),
        first_exit,
        output: if succeeded { output } else { None },
        succeeded,
        budget,
        transcript,
    })
}

/// Independent training runs; trial `t` uses stream `t` of `seed`, whose
/// first `n` draws pick the hidden shift.
pub fn training_runs(
    kind: TrainerKind,
    n: usize,
    alpha: f64,
    budget: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrainerResult>> {
    validate(alpha, budget)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stack = RandomStack::new(seed, t as u64);
            let target = ShiftedProductFunction::new(stack.pop_shift(n))?;
            run_trainer(kind, &target, alpha, budget, &mut stack)
        })
        .collect()
}

/// Median of `queries_total`.
pub fn median_queries(results: &[TrainerResult]) -> Option<f64> {
    let mut q: Vec<usize> = results.iter().map(|r| r.queries_total).collect();
    if q.is_empty() {
        return None;
    }
    q.sort_unstable();
    let mid = q.len() / 2;
    Some(if q.len().is_multiple_of(2) {
        (q[mid - 1] + q[mid]) as f64 / 2.0
    } else {
        q[mid] as f64
    })
}

/// Runs two copies of a trainer in lockstep on identical random streams, one
/// sampling `f` and the other `fbar`. Returns the 1-based query at which the
/// runs first differ in query point, outcome, consumed draws or state.
pub fn coupled_divergence(
    kind: TrainerKind,
    f: &dyn ExpectationFn,
    fbar: &dyn ExpectationFn,
    m: usize,
    stack: &RandomStack,
) -> Result<Option<usize>> {
    crate::error::check_dim(f.dim(), fbar.dim())?;
    let n = f.dim();
    let (mut ta, mut tb) = (kind.build(n), kind.build(n));
    let (mut sa, mut sb) = (stack.clone(), stack.clone());
    for q in 1..=m {
        let xa = ta.propose(&mut sa);
        let xb = tb.propose(&mut sb);
        if !xa.bits_eq(&xb) {
            return Ok(Some(q));
        }
        let oa = sample_query(f, &xa, &mut sa)?;
        let ob = sample_query(fbar, &xb, &mut sb)?;
        ta.observe(oa);
        tb.observe(ob);
        if oa != ob || sa.draw_index() != sb.draw_index() || ta.state_digest() != tb.state_digest() {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceEstimate {
    pub m: usize,
    pub probability: f64,
    pub stderr: f64,
    /// `δ(n)·m/2`.
    pub bound: f64,
    pub violated: bool,
    /// Rows for every prefix length `1..=m`.
    pub table: Vec<CdfRow>,
}

/// Fraction of coupled trials (true function vs. plateau-clamped function)
/// that diverge within `m` queries, against the bound `δ(n)·m/2`.
pub fn divergence_experiment(
    kind: TrainerKind,
    n: usize,
    m: usize,
    trials: usize,
    eta: f64,
    seed: u64,
) -> Result<DivergenceEstimate> {
    if n < 4 {
        return Err(invalid("divergence experiments need n >= 4"));
    }
    if trials < 1 {
        return Err(invalid("trials must be at least 1"));
    }
    let d = delta(n);
    let times = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stack = RandomStack::new(seed, t as u64);
            let f = ShiftedProductFunction::new(stack.pop_shift(n))?;
            let region = PlateauRegion::new(f.shift().clone());
            let fbar = clamp_to_plateau(f.clone(), region, eta)?;
            coupled_divergence(kind, &f, &fbar, m, &stack)
        })
        .collect::<Result<Vec<_>>>()?;
    let table = cdf_table(&times, m, |k| d * k as f64 / 2.0);
    Ok(match table.last() {
        Some(row) => DivergenceEstimate {
            m,
            probability: row.empirical,
            stderr: row.stderr,
            bound: row.bound,
            violated: table.iter().any(|r| r.violated),
            table,
        },
        None => DivergenceEstimate {
            m,
            probability: 0.0,
            stderr: 0.0,
            bound: 0.0,
            violated: false,
            table,
        },
    })
}

/// Index of the first query outside the plateau of `target`, within `m_max` queries.
pub fn first_exit_time(
    trainer: &mut dyn Trainer,
    target: &ShiftedProductFunction,
    m_max: usize,
    stack: &mut RandomStack,
) -> Result<Option<usize>> {
    let region = PlateauRegion::new(target.shift().clone());
    for q in 1..=m_max {
        let x = trainer.propose(stack);
        let o = sample_query(target, &x, stack)?;
        trainer.observe(o);
        if !region.contains(&x)? {
            return Ok(Some(q));
        }
    }
    Ok(None)
}

/// Empirical CDF of the first plateau exit against `(p_exact + δ/2)·m`.
pub fn exit_time_experiment(
    kind: TrainerKind,
    n: usize,
    m_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<CdfRow>> {
    if trials < 1 {
        return Err(invalid("trials must be at least 1"));
    }
    let slope = p_exact(n)? + delta(n) / 2.0;
    let times = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stack = RandomStack::new(seed, t as u64);
            let target = ShiftedProductFunction::new(stack.pop_shift(n))?;
            let mut trainer = kind.build(n);
            first_exit_time(trainer.as_mut(), &target, m_max, &mut stack)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cdf_table(&times, m_max, |m| slope * m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::in_plateau;

    /// Always re-queries a fixed point.
    struct Stubborn(TorusPoint);

    impl Trainer for Stubborn {
        fn propose(&mut self, _: &mut RandomStack) -> TorusPoint {
            self.0.clone()
        }
        fn observe(&mut self, _: Outcome) {}
        fn candidate(&self) -> Option<TorusPoint> {
            Some(self.0.clone())
        }
        fn state_digest(&self) -> u64 {
            0
        }
    }

    #[test]
    fn default_alpha_needs_four_parameters() {
        assert!(default_alpha(3).is_err());
        assert!((default_alpha(4).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = ShiftedProductFunction::base(4).unwrap();
        let mut s = RandomStack::new(0, 0);
        assert!(run_trainer(TrainerKind::RandomSearch, &f, 0.1, 0, &mut s).is_err());
        assert!(run_trainer(TrainerKind::RandomSearch, &f, 0.0, 10, &mut s).is_err());
        assert!(run_trainer(TrainerKind::RandomSearch, &f, -0.5, 10, &mut s).is_err());
        assert!(run_trainer(TrainerKind::RandomSearch, &f, 2.0, 10, &mut s).is_err());
    }

    #[test]
    fn exhausted_budget_reports_no_output() {
        let f = ShiftedProductFunction::base(6).unwrap();
        let mut s = RandomStack::new(1, 0);
        let r = run_trainer(TrainerKind::RandomSearch, &f, default_alpha(6).unwrap(), 3, &mut s).unwrap();
        assert!(!r.succeeded);
        assert_eq!(r.output, None);
        assert_eq!(r.queries_total, 3);
    }

    #[test]
    fn success_iff_a_good_point_was_queried() {
        let n = 4;
        let alpha = default_alpha(n).unwrap();
        for t in 0..20u64 {
            let f = ShiftedProductFunction::base(n).unwrap();
            let mut s = RandomStack::new(77, t);
            let r = run_trainer(TrainerKind::RandomSearch, &f, alpha, 20_000, &mut s).unwrap();
            let good: Vec<_> = r
                .transcript
                .entries()
                .iter()
                .map(|(x, _)| f.value(x).unwrap() >= 8.0 / 9.0 - 1e-15)
                .collect();
            assert_eq!(r.succeeded, good.iter().any(|&g| g));
            if r.succeeded {
                assert!(*good.last().unwrap());
                assert!(good[..good.len() - 1].iter().all(|&g| !g));
                let out = r.output.as_ref().unwrap();
                assert!(r.transcript.contains_point(out));
                assert!(f.value(out).unwrap() >= 1.0 - alpha);
                assert!(r.first_exit.unwrap() <= r.queries_total);
            }
        }
    }

    #[test]
    fn output_point_is_always_queried() {
        let n = 4;
        for kind in [TrainerKind::Spsa, TrainerKind::ParamShift, TrainerKind::RandomSearch] {
            for t in 0..10u64 {
                let mut s = RandomStack::new(3, t);
                let f = ShiftedProductFunction::new(s.pop_shift(n)).unwrap();
                let budget = 40;
                let r = run_trainer(kind, &f, 0.5, budget, &mut s).unwrap();
                assert!(r.queries_total <= budget + 1);
                if let Some(out) = &r.output {
                    assert!(r.transcript.contains_point(out));
                }
            }
        }
    }

    #[test]
    fn reproducible_with_identical_seeds() {
        for kind in [TrainerKind::RandomSearch, TrainerKind::Spsa, TrainerKind::ParamShift] {
            let a = training_runs(kind, 5, 0.5, 200, 8, 123).unwrap();
            let b = training_runs(kind, 5, 0.5, 200, 8, 123).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn trainers_make_progress_with_loose_alpha() {
        // with alpha close to 2 any point with f > -1 + small succeeds quickly
        for kind in [TrainerKind::RandomSearch, TrainerKind::Spsa, TrainerKind::ParamShift] {
            let runs = training_runs(kind, 2, 1.2, 500, 50, 9).unwrap();
            assert!(runs.iter().filter(|r| r.succeeded).count() > 40, "{kind:?}");
        }
    }

    #[test]
    fn param_shift_climbs_a_single_parameter() {
        // n = 1 has no plateau to speak of; ascent should find the peak
        let f = ShiftedProductFunction::new(GridShift::new(vec![1]).unwrap()).unwrap();
        let mut hits = 0;
        for t in 0..20u64 {
            let mut s = RandomStack::new(21, t);
            let r = run_trainer(TrainerKind::ParamShift, &f, 0.05, 4_000, &mut s).unwrap();
            hits += r.succeeded as usize;
        }
        assert!(hits >= 15, "{hits}");
    }

    #[test]
    fn stubborn_trainer_inside_plateau_never_exits() {
        let n = 4;
        let f = ShiftedProductFunction::base(n).unwrap();
        let inside = TorusPoint::new(vec![0.5; n]);
        assert!(in_plateau(&PlateauRegion::new(GridShift::zero(n)), &inside).unwrap());
        let mut s = RandomStack::new(0, 0);
        assert_eq!(first_exit_time(&mut Stubborn(inside), &f, 100, &mut s).unwrap(), None);
        let mut s = RandomStack::new(0, 0);
        let at_peak = TorusPoint::zeros(n);
        assert_eq!(first_exit_time(&mut Stubborn(at_peak), &f, 100, &mut s).unwrap(), Some(1));
    }

    #[test]
    fn identical_functions_never_diverge() {
        let f = ShiftedProductFunction::base(5).unwrap();
        for kind in [TrainerKind::RandomSearch, TrainerKind::Spsa, TrainerKind::ParamShift] {
            for t in 0..50u64 {
                let s = RandomStack::new(4, t);
                assert_eq!(coupled_divergence(kind, &f, &f, 30, &s).unwrap(), None);
            }
        }
    }

    #[test]
    fn divergence_examples() {
        let est = divergence_experiment(TrainerKind::RandomSearch, 6, 0, 100, 0.0, 1).unwrap();
        assert_eq!(est.probability, 0.0);
        assert!(divergence_experiment(TrainerKind::RandomSearch, 3, 5, 100, 0.0, 1).is_err());
        let est = divergence_experiment(TrainerKind::Spsa, 8, 10, 2_000, 0.0, 1).unwrap();
        assert!(!est.violated);
    }

    #[test]
    fn undiverged_runs_have_identical_transcripts() {
        // when the coupled runs never diverge, full transcripts coincide
        let n = 8;
        for t in 0..100u64 {
            let mut stack = RandomStack::new(31, t);
            let f = ShiftedProductFunction::new(stack.pop_shift(n)).unwrap();
            let fbar = clamp_to_plateau(f.clone(), PlateauRegion::new(f.shift().clone()), 0.0).unwrap();
            let m = 12;
            if coupled_divergence(TrainerKind::RandomSearch, &f, &fbar, m, &stack).unwrap().is_none() {
                let mut sa = stack.clone();
                let mut sb = stack.clone();
                let mut ta = RandomSearch::new(n);
                let mut tb = RandomSearch::new(n);
                let (mut xa, mut xb) = (Transcript::new(), Transcript::new());
                for _ in 0..m {
                    let p = ta.propose(&mut sa);
                    let o = sample_query(&f, &p, &mut sa).unwrap();
                    ta.observe(o);
                    xa.push(p, o);
                    let p = tb.propose(&mut sb);
                    let o = sample_query(&fbar, &p, &mut sb).unwrap();
                    tb.observe(o);
                    xb.push(p, o);
                }
                assert!(xa.bits_eq(&xb));
            }
        }
    }

    #[test]
    fn median_of_counts() {
        assert_eq!(median_queries(&[]), None);
        let f = ShiftedProductFunction::base(1).unwrap();
        let mk = |q: usize| TrainerResult {
            algo: TrainerKind::RandomSearch,
            n: 1,
            hidden: f.shift().clone(),
            queries_total: q,
            first_exit: None,
            output: None,
            succeeded: false,
            budget: 10,
            transcript: Transcript::new(),
        };
        assert_eq!(median_queries(&[mk(3), mk(1), mk(2)]), Some(2.0));
        assert_eq!(median_queries(&[mk(4), mk(1), mk(2), mk(3)]), Some(2.5));
    }
}
