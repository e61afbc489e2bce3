//! Arithmetic on the n-torus `(R/Z)^n` and on the grid `{0, 1/3, 2/3}^n`.
//!
//! Coordinates are stored as `f64` in `[0, 1)`. Grid membership and
//! near/far classification work on the scaled coordinate `3x`, so that the
//! midpoints between grid points (`1/6`, `1/2`, `5/6`) are detected exactly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};

/// Number of grid points per coordinate.
pub const GRID: u8 = 3;

/// Coordinates closer than this (in Bohr distance) to a grid value are "near".
pub const NEAR_RADIUS: f64 = 1.0 / 6.0;

/// Wraps a real number into `[0, 1)`.
pub fn wrap_unit(c: f64) -> f64 {
    let r = c - c.floor();
    // tiny negatives round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Circular distance on `R/Z`: the distance from `u - v` to the nearest integer.
pub fn bohr_dist(u: f64, v: f64) -> f64 {
    let d = (u - v).abs() % 1.0;
    d.min(1.0 - d)
}

/// A point of the n-torus; every coordinate lies in `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: Vec<f64>,
}

impl TorusPoint {
    /// Builds a point from arbitrary reals, wrapping each coordinate.
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        let mut coords = coords.into();
        for c in coords.iter_mut() {
            *c = wrap_unit(*c);
        }
        Self { coords }
    }

    pub fn zeros(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Coordinatewise `self - shift (mod 1)`.
    pub fn sub_shift(&self, shift: &GridShift) -> Result<TorusPoint> {
        check_dim(self.dim(), shift.dim())?;
        Ok(TorusPoint::new(
            self.coords
                .iter()
                .zip(shift.values())
                .map(|(x, a)| x - a)
                .collect::<Vec<_>>(),
        ))
    }

    /// Coordinatewise `self + offset (mod 1)`.
    pub fn translate(&self, offset: &[f64]) -> Result<TorusPoint> {
        check_dim(self.dim(), offset.len())?;
        Ok(TorusPoint::new(
            self.coords.iter().zip(offset).map(|(x, t)| x + t).collect::<Vec<_>>(),
        ))
    }

    /// Bitwise identity of the stored coordinates.
    pub fn bits_eq(&self, other: &TorusPoint) -> bool {
        self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl From<&GridShift> for TorusPoint {
    fn from(a: &GridShift) -> Self {
        TorusPoint {
            coords: a.values().collect(),
        }
    }
}

/// A hidden shift `a ∈ {0, 1/3, 2/3}^n`, stored as trits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShift {
    trits: Vec<u8>,
}

impl GridShift {
    pub fn new(trits: impl Into<Vec<u8>>) -> Result<Self> {
        let trits = trits.into();
        if let Some(t) = trits.iter().find(|&&t| t >= GRID) {
            return Err(invalid(format!("trit {t} is not in {{0,1,2}}")));
        }
        Ok(Self { trits })
    }

    pub fn zero(n: usize) -> Self {
        Self { trits: vec![0; n] }
    }

    /// The shift with little-endian trit-lexicographic index `index`.
    pub fn from_index(n: usize, mut index: usize) -> Self {
        let mut trits = Vec::with_capacity(n);
        for _ in 0..n {
            trits.push((index % GRID as usize) as u8);
            index /= GRID as usize;
        }
        Self { trits }
    }

    /// Little-endian index: coordinate 0 is the least significant trit.
    pub fn index(&self) -> usize {
        self.trits
            .iter()
            .rev()
            .fold(0usize, |acc, &t| acc * GRID as usize + t as usize)
    }

    /// Number of family members for dimension `n`, i.e. `3^n`.
    pub fn count(n: usize) -> Result<usize> {
        u32::try_from(n)
            .ok()
            .and_then(|n| (GRID as usize).checked_pow(n))
            .ok_or_else(|| invalid(format!("3^{n} overflows")))
    }

    /// All `3^n` shifts in index order.
    pub fn enumerate(n: usize) -> Result<impl Iterator<Item = GridShift>> {
        let total = Self::count(n)?;
        Ok((0..total).map(move |i| GridShift::from_index(n, i)))
    }

    pub fn dim(&self) -> usize {
        self.trits.len()
    }

    pub fn trits(&self) -> &[u8] {
        &self.trits
    }

    /// Grid coordinates `trit / 3`.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.trits.iter().map(|&t| t as f64 / GRID as f64)
    }
}

impl fmt::Display for GridShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.trits {
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Distance from `3x - trit` to the nearest multiple of 3, in grid units.
/// A coordinate is near its grid value iff this is `< 0.5`.
fn scaled_dist(x: f64, trit: u8) -> f64 {
    let s = (3.0 * x - trit as f64).rem_euclid(3.0);
    s.min(3.0 - s)
}

/// Rounds a point to its nearest grid shift.
///
/// Returns the shift and a flag that is set when some coordinate sat exactly
/// halfway between two grid values; such ties go to the smaller trit.
pub fn round_to_grid(x: &TorusPoint) -> (GridShift, bool) {
    let mut tie = false;
    let trits = x
        .coords()
        .iter()
        .map(|&c| {
            let s = 3.0 * c;
            let lower = s.floor();
            let frac = s - lower;
            let lo = (lower as i64).rem_euclid(3) as u8;
            let hi = (lo + 1) % GRID;
            if frac < 0.5 {
                lo
            } else if frac > 0.5 {
                hi
            } else {
                tie = true;
                lo.min(hi)
            }
        })
        .collect();
    (GridShift { trits }, tie)
}

/// Number of coordinates `j` with `bohr_dist(x_j, a_j) >= 1/6`.
///
/// This is the far count: the Hamming distance between `a` and the rounding
/// of `x` whenever the rounding is tie-free.
pub fn hamming_d(a: &GridShift, x: &TorusPoint) -> Result<usize> {
    check_dim(a.dim(), x.dim())?;
    Ok(x
        .coords()
        .iter()
        .zip(a.trits())
        .filter(|(&c, &t)| scaled_dist(c, t) >= 0.5)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bohr_dist_examples() {
        assert_abs_diff_eq!(bohr_dist(0.9, 0.1), 0.2, epsilon = 1e-12);
        assert_eq!(bohr_dist(0.5, 0.0), 0.5);
        assert_abs_diff_eq!(bohr_dist(1.0 / 3.0, 2.0 / 3.0), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn wrapping() {
        let p = TorusPoint::new(vec![1.25, -0.25, 3.0, -1e-18]);
        assert_eq!(p.coords(), &[0.25, 0.75, 0.0, 0.0]);
        assert!(p.coords().iter().all(|&c| (0.0..1.0).contains(&c)));
    }

    #[test]
    fn rounding_examples() {
        let (a, tie) = round_to_grid(&TorusPoint::new(vec![0.30, 0.70]));
        assert_eq!(a.trits(), &[1, 2]);
        assert!(!tie);

        let (a, tie) = round_to_grid(&TorusPoint::new(vec![0.5]));
        assert_eq!(a.trits(), &[1]);
        assert!(tie);

        let (a, tie) = round_to_grid(&TorusPoint::zeros(2));
        assert_eq!(a.trits(), &[0, 0]);
        assert!(!tie);
    }

    #[test]
    fn rounding_ties_go_to_smaller_trit() {
        // 1/6 sits between trits 0 and 1; 5/6 between 2 and 0 (wrapping)
        let (a, tie) = round_to_grid(&TorusPoint::new(vec![0.5 / 3.0, 2.5 / 3.0]));
        assert!(tie);
        assert_eq!(a.trits(), &[0, 0]);
        // just below 1.0 rounds to 0 via wrap
        let (a, _) = round_to_grid(&TorusPoint::new(vec![0.99]));
        assert_eq!(a.trits(), &[0]);
    }

    #[test]
    fn hamming_examples() {
        let z2 = GridShift::zero(2);
        assert_eq!(hamming_d(&z2, &TorusPoint::new(vec![0.5, 0.05])).unwrap(), 1);
        assert_eq!(hamming_d(&GridShift::zero(3), &TorusPoint::zeros(3)).unwrap(), 0);
        assert_eq!(hamming_d(&z2, &TorusPoint::new(vec![0.5, 0.5])).unwrap(), 2);
    }

    #[test]
    fn hamming_boundary_counts_as_far() {
        let x = TorusPoint::new(vec![0.5 / 3.0]);
        assert_eq!(hamming_d(&GridShift::zero(1), &x).unwrap(), 1);
    }

    #[test]
    fn hamming_dimension_mismatch() {
        let err = hamming_d(&GridShift::zero(2), &TorusPoint::zeros(3)).unwrap_err();
        assert_eq!(err, crate::LabError::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn shift_index_roundtrip_and_count() {
        assert_eq!(GridShift::count(4).unwrap(), 81);
        let all: Vec<_> = GridShift::enumerate(3).unwrap().collect();
        assert_eq!(all.len(), 27);
        assert_eq!(all[1].trits(), &[1, 0, 0]);
        for (i, a) in all.iter().enumerate() {
            assert_eq!(a.index(), i);
        }
        assert!(GridShift::new(vec![0, 3]).is_err());
    }

    fn shift_strategy(n: usize) -> impl Strategy<Value = GridShift> {
        proptest::collection::vec(0u8..3, n).prop_map(|t| GridShift::new(t).unwrap())
    }

    proptest! {
        #[test]
        fn bohr_symmetric_and_translation_invariant(u in 0.0f64..1.0, v in 0.0f64..1.0, t in -3.0f64..3.0) {
            prop_assert_eq!(bohr_dist(u, v), bohr_dist(v, u));
            prop_assert!((bohr_dist(u + t, v + t) - bohr_dist(u, v)).abs() < 1e-12);
            prop_assert!((0.0..=0.5).contains(&bohr_dist(u, v)));
        }

        #[test]
        fn hamming_is_shift_covariant(
            (a, x) in (1usize..8).prop_flat_map(|n| (shift_strategy(n), proptest::collection::vec(0.0f64..1.0, n)))
        ) {
            let x = TorusPoint::new(x);
            let lhs = hamming_d(&a, &x).unwrap();
            let rhs = hamming_d(&GridShift::zero(a.dim()), &x.sub_shift(&a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn hamming_matches_rounding_when_tie_free(
            (a, x) in (1usize..8).prop_flat_map(|n| (shift_strategy(n), proptest::collection::vec(0.0f64..1.0, n)))
        ) {
            let x = TorusPoint::new(x);
            let (r, tie) = round_to_grid(&x);
            prop_assume!(!tie);
            let disagree = r.trits().iter().zip(a.trits()).filter(|(p, q)| p != q).count();
            prop_assert_eq!(hamming_d(&a, &x).unwrap(), disagree);
        }
    }
}
