//! The plateau game: Alice hides a grid shift `a`, Bob queries points and
//! wins on the first query outside the plateau region `P_a`.
//!
//! Bob only ever hears "yes" until he wins, so any adaptive strategy is
//! equivalent to a fixed distribution over query sequences. Strategies are
//! therefore driven by `(round, stack)`; [`AdaptiveStrategy`] additionally
//! sees the history for the empirical no-advantage check.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::oracle::RandomStack;
use crate::torus::{hamming_d, round_to_grid, GridShift, TorusPoint, GRID};

/// `P_a = { x : d(a, x) > n/2 }`, with `d` the far count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlateauRegion {
    center: GridShift,
}

impl PlateauRegion {
    pub fn new(center: GridShift) -> Self {
        Self { center }
    }

    pub fn n(&self) -> usize {
        self.center.dim()
    }

    pub fn center(&self) -> &GridShift {
        &self.center
    }

    pub fn contains(&self, x: &TorusPoint) -> Result<bool> {
        let far = hamming_d(&self.center, x)?;
        Ok(2 * far > self.n())
    }

    pub(crate) fn contains_unchecked(&self, x: &TorusPoint) -> bool {
        self.contains(x).expect("dimension checked by caller")
    }
}

pub fn in_plateau(region: &PlateauRegion, x: &TorusPoint) -> Result<bool> {
    region.contains(x)
}

/// `δ(n) = (2/3)^(n/2)`.
pub fn delta(n: usize) -> f64 {
    (2.0f64 / 3.0).powf(n as f64 / 2.0)
}

/// `e^(-n/36)`.
pub fn p_hoeffding(n: usize) -> f64 {
    (-(n as f64) / 36.0).exp()
}

fn binomial(n: usize, k: usize) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

/// Exact `sup_x P(x ∉ P_A)`: the probability that `Bin(n, 1/3) >= ceil(n/2)`.
pub fn p_exact_ratio(n: usize) -> Result<BigRational> {
    if n < 1 {
        return Err(invalid("n must be at least 1"));
    }
    let threshold = n.div_ceil(2);
    let mut num = BigUint::zero();
    for k in threshold..=n {
        num += binomial(n, k) * BigUint::from(2u32).pow((n - k) as u32);
    }
    let den = BigUint::from(GRID as u32).pow(n as u32);
    Ok(BigRational::new(num.into(), den.into()))
}

pub fn p_exact(n: usize) -> Result<f64> {
    Ok(p_exact_ratio(n)?.to_f64().expect("probability fits in f64"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: usize,
    pub delta: f64,
    pub p_exact: f64,
    pub p_hoeffding: f64,
}

pub fn bounds(n: usize) -> Result<BoundsRow> {
    Ok(BoundsRow {
        n,
        delta: delta(n),
        p_exact: p_exact(n)?,
        p_hoeffding: p_hoeffding(n),
    })
}

/// A non-adaptive query generator: round index and randomness only.
pub trait QueryStrategy: Send {
    fn next_query(&mut self, round: usize, stack: &mut RandomStack) -> TorusPoint;
}

/// A query generator that also sees past queries and Alice's answers.
pub trait AdaptiveStrategy: Send {
    fn next_query(
        &mut self,
        round: usize,
        history: &[(TorusPoint, bool)],
        stack: &mut RandomStack,
    ) -> TorusPoint;
}

/// Lifts a non-adaptive strategy; the history is ignored.
pub struct NonAdaptive<S>(pub S);

impl<S: QueryStrategy> AdaptiveStrategy for NonAdaptive<S> {
    fn next_query(&mut self, round: usize, _: &[(TorusPoint, bool)], stack: &mut RandomStack) -> TorusPoint {
        self.0.next_query(round, stack)
    }
}

impl<S: QueryStrategy + ?Sized> QueryStrategy for Box<S> {
    fn next_query(&mut self, round: usize, stack: &mut RandomStack) -> TorusPoint {
        (**self).next_query(round, stack)
    }
}

/// Uniformly random points.
pub struct UniformQueries {
    pub n: usize,
}

impl QueryStrategy for UniformQueries {
    fn next_query(&mut self, _: usize, stack: &mut RandomStack) -> TorusPoint {
        stack.pop_point(self.n)
    }
}

/// Walks the grid in index order, one grid point per round.
pub struct GridSweep {
    pub n: usize,
}

impl QueryStrategy for GridSweep {
    fn next_query(&mut self, round: usize, _: &mut RandomStack) -> TorusPoint {
        let total = GridShift::count(self.n).unwrap_or(usize::MAX);
        TorusPoint::from(&GridShift::from_index(self.n, (round - 1) % total))
    }
}

/// Always the same point.
pub struct FixedQuery {
    pub point: TorusPoint,
}

impl QueryStrategy for FixedQuery {
    fn next_query(&mut self, _: usize, _: &mut RandomStack) -> TorusPoint {
        self.point.clone()
    }
}

/// Per coordinate, picks a grid value least used by earlier (rejected)
/// queries: a "yes" at `x` means the hidden shift disagrees with the
/// rounding of `x` on most coordinates.
pub struct LeastUsedTrit {
    pub n: usize,
}

impl AdaptiveStrategy for LeastUsedTrit {
    fn next_query(
        &mut self,
        _: usize,
        history: &[(TorusPoint, bool)],
        stack: &mut RandomStack,
    ) -> TorusPoint {
        let mut counts = vec![[0usize; GRID as usize]; self.n];
        for (x, _) in history {
            let (g, _) = round_to_grid(x);
            for (c, &t) in counts.iter_mut().zip(g.trits()) {
                c[t as usize] += 1;
            }
        }
        let trits: Vec<u8> = counts
            .iter()
            .map(|c| {
                let min = *c.iter().min().expect("nonempty");
                let ties: Vec<u8> = (0..GRID).filter(|&t| c[t as usize] == min).collect();
                ties[stack.pop_index(ties.len())]
            })
            .collect();
        TorusPoint::from(&GridShift::new(trits).expect("valid trits"))
    }
}

/// Named strategies, buildable per game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StrategyKind {
    Uniform,
    GridSweep,
    Adaptive,
    Fixed(TorusPoint),
}

impl StrategyKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::Uniform),
            "sweep" => Ok(Self::GridSweep),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(invalid(format!("unknown strategy '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::GridSweep => "sweep",
            Self::Adaptive => "adaptive",
            Self::Fixed(_) => "fixed",
        }
    }

    /// The non-adaptive form, if there is one.
    pub fn build(&self, n: usize) -> Result<Box<dyn QueryStrategy>> {
        Ok(match self {
            Self::Uniform => Box::new(UniformQueries { n }),
            Self::GridSweep => Box::new(GridSweep { n }),
            Self::Fixed(p) => {
                check_dim(n, p.dim())?;
                Box::new(FixedQuery { point: p.clone() })
            }
            Self::Adaptive => return Err(invalid("the adaptive strategy has no non-adaptive form")),
        })
    }

    pub fn build_adaptive(&self, n: usize) -> Result<Box<dyn AdaptiveStrategy>> {
        match self {
            Self::Adaptive => Ok(Box::new(LeastUsedTrit { n })),
            other => Ok(Box::new(NonAdaptive(other.build(n)?))),
        }
    }
}

/// One play of the game. `win_round` is 1-based; `None` means censored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub hidden: GridShift,
    pub queries: Vec<TorusPoint>,
    pub win_round: Option<usize>,
}

pub fn play_game(
    hidden: &GridShift,
    strategy: &mut dyn AdaptiveStrategy,
    max_rounds: usize,
    stack: &mut RandomStack,
) -> Result<GameRecord> {
    let region = PlateauRegion::new(hidden.clone());
    let mut history: Vec<(TorusPoint, bool)> = Vec::new();
    let mut win_round = None;
    for round in 1..=max_rounds {
        let x = strategy.next_query(round, &history, stack);
        let member = region.contains(&x)?;
        history.push((x, member));
        if !member {
            win_round = Some(round);
            break;
        }
    }
    Ok(GameRecord {
        hidden: hidden.clone(),
        queries: history.into_iter().map(|(x, _)| x).collect(),
        win_round,
    })
}

/// One row of an empirical CDF checked against a linear bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfRow {
    pub m: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub violated: bool,
}

impl CdfRow {
    /// `bound_at(m)` is compared with `empirical - 3·stderr`.
    pub(crate) fn from_counts(m: usize, hits: usize, trials: usize, bound: f64) -> Self {
        let empirical = hits as f64 / trials as f64;
        let stderr = (empirical * (1.0 - empirical) / trials as f64).sqrt();
        Self {
            m,
            empirical,
            stderr,
            bound,
            violated: empirical > bound + 3.0 * stderr,
        }
    }

    /// Slack in standard errors; infinite when the estimate has zero variance
    /// and sits below the bound.
    pub fn margin_sigma(&self) -> f64 {
        let slack = self.bound - self.empirical;
        if self.stderr > 0.0 {
            slack / self.stderr
        } else if slack >= 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Builds CDF rows `m = 1..=m_max` from per-trial event times.
pub(crate) fn cdf_table(
    times: &[Option<usize>],
    m_max: usize,
    bound_at: impl Fn(usize) -> f64,
) -> Vec<CdfRow> {
    let mut hist = vec![0usize; m_max + 1];
    for t in times.iter().flatten() {
        if *t <= m_max {
            hist[*t] += 1;
        }
    }
    let mut cum = 0;
    (1..=m_max)
        .map(|m| {
            cum += hist[m];
            CdfRow::from_counts(m, cum, times.len(), bound_at(m))
        })
        .collect()
}

/// Plays `games` independent games with uniformly hidden shifts and
/// tabulates `P(M_A <= m)` against `p_exact(n)·m`.
///
/// Game `g` uses stream `g` of `seed`; the hidden shift is its first draw.
pub fn estimate_win_cdf(
    n: usize,
    strategy: &StrategyKind,
    games: usize,
    m_max: usize,
    seed: u64,
) -> Result<Vec<CdfRow>> {
    if games < 1 {
        return Err(invalid("games must be at least 1"));
    }
    let p = p_exact(n)?;
    strategy.build_adaptive(n)?;
    let times = (0..games)
        .into_par_iter()
        .map(|g| {
            let mut stack = RandomStack::new(seed, g as u64);
            let hidden = stack.pop_shift(n);
            let mut bob = strategy.build_adaptive(n)?;
            Ok(play_game(&hidden, bob.as_mut(), m_max, &mut stack)?.win_round)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cdf_table(&times, m_max, |m| p * m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ExpectationFn, ShiftedProductFunction};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn membership_examples() {
        let r = PlateauRegion::new(GridShift::zero(2));
        assert!(in_plateau(&r, &TorusPoint::new(vec![0.5, 0.5])).unwrap());
        assert!(!in_plateau(&r, &TorusPoint::new(vec![0.5, 0.05])).unwrap());
        for n in 1..10 {
            let a = GridShift::from_index(n, 7 % GridShift::count(n).unwrap());
            let r = PlateauRegion::new(a.clone());
            assert!(!r.contains(&TorusPoint::from(&a)).unwrap());
        }
        assert!(r.contains(&TorusPoint::zeros(3)).is_err());
    }

    #[test]
    fn bounds_examples() {
        assert_eq!(p_exact_ratio(1).unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(p_exact_ratio(4).unwrap(), BigRational::new(11.into(), 27.into()));
        let b = bounds(4).unwrap();
        assert_abs_diff_eq!(b.delta, 4.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.p_exact, 0.40741, epsilon = 1e-5);
        assert_abs_diff_eq!(bounds(36).unwrap().p_hoeffding, 0.367879, epsilon = 1e-6);
        assert!(bounds(0).is_err());
    }

    #[test]
    fn exact_p_matches_enumeration() {
        // brute force over all 3^n shifts at a tie-free generic point
        for n in 1..=7 {
            let x = TorusPoint::new((0..n).map(|j| 0.05 + 0.31 * j as f64).collect::<Vec<_>>());
            let outside = GridShift::enumerate(n)
                .unwrap()
                .filter(|a| !PlateauRegion::new(a.clone()).contains(&x).unwrap())
                .count();
            let total = GridShift::count(n).unwrap();
            assert_abs_diff_eq!(outside as f64 / total as f64, p_exact(n).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn exact_p_below_hoeffding_bounds() {
        for n in 1..=64 {
            let b = bounds(n).unwrap();
            assert!(b.p_exact > 0.0);
            assert!(b.p_exact <= b.p_hoeffding, "n = {n}");
            assert!(b.p_exact <= (-(n as f64) / 18.0).exp(), "n = {n}");
            assert!(b.delta > 0.0 && b.delta < 1.0);
        }
    }

    #[test]
    fn plateau_values_are_small() {
        let n = 10;
        let f0 = ShiftedProductFunction::base(n).unwrap();
        let r = PlateauRegion::new(GridShift::zero(n));
        let bound = delta(n);
        let mut s = RandomStack::new(99, 0);
        let mut inside = 0;
        for _ in 0..20_000 {
            let x = s.pop_point(n);
            if r.contains(&x).unwrap() {
                inside += 1;
                assert!(f0.value(&x).unwrap().abs() < bound);
            }
        }
        assert!(inside > 0);
    }

    #[test]
    fn game_examples() {
        let hidden = GridShift::new(vec![1, 0, 2]).unwrap();
        let mut s = RandomStack::new(0, 0);
        let mut bob = NonAdaptive(FixedQuery { point: TorusPoint::from(&hidden) });
        let rec = play_game(&hidden, &mut bob, 10, &mut s).unwrap();
        assert_eq!(rec.win_round, Some(1));
        assert_eq!(rec.queries.len(), 1);

        let far = TorusPoint::new(hidden.values().map(|v| v + 0.5).collect::<Vec<_>>());
        let mut bob = NonAdaptive(FixedQuery { point: far });
        let rec = play_game(&hidden, &mut bob, 5, &mut s).unwrap();
        assert_eq!(rec.win_round, None);
        assert_eq!(rec.queries.len(), 5);
    }

    #[test]
    fn game_record_invariant() {
        let n = 4;
        for g in 0..200u64 {
            let mut s = RandomStack::new(1, g);
            let hidden = s.pop_shift(n);
            let mut bob = LeastUsedTrit { n };
            let rec = play_game(&hidden, &mut bob, 20, &mut s).unwrap();
            let r = PlateauRegion::new(hidden);
            let last = rec.win_round.unwrap_or(rec.queries.len() + 1);
            for (i, x) in rec.queries.iter().enumerate() {
                assert_eq!(r.contains(x).unwrap(), i + 1 != last);
            }
        }
    }

    #[test]
    fn first_round_rate_matches_exact_p() {
        let rows = estimate_win_cdf(4, &StrategyKind::Uniform, 100_000, 1, 2024).unwrap();
        let p = p_exact(4).unwrap();
        let row = &rows[0];
        let se = (p * (1.0 - p) / 100_000f64).sqrt();
        assert!((row.empirical - p).abs() <= 3.0 * se, "{} vs {p}", row.empirical);
    }

    #[test]
    fn empty_table_for_zero_rounds() {
        assert!(estimate_win_cdf(3, &StrategyKind::Uniform, 10, 0, 1).unwrap().is_empty());
        assert!(estimate_win_cdf(3, &StrategyKind::Uniform, 0, 5, 1).is_err());
    }

    #[test]
    fn strategies_respect_lemma_bound() {
        for kind in [StrategyKind::Uniform, StrategyKind::GridSweep, StrategyKind::Adaptive] {
            let rows = estimate_win_cdf(6, &kind, 20_000, 20, 5).unwrap();
            assert!(rows.iter().all(|r| !r.violated), "{kind:?}");
        }
    }

    proptest! {
        #[test]
        fn membership_is_shift_covariant(
            (trits, x) in (1usize..9).prop_flat_map(|n| (
                proptest::collection::vec(0u8..3, n),
                proptest::collection::vec(0.0f64..1.0, n),
            ))
        ) {
            let a = GridShift::new(trits).unwrap();
            let x = TorusPoint::new(x);
            let pa = PlateauRegion::new(a.clone());
            let p0 = PlateauRegion::new(GridShift::zero(a.dim()));
            prop_assert_eq!(pa.contains(&x).unwrap(), p0.contains(&x.sub_shift(&a).unwrap()).unwrap());
        }
    }
}
