//! The shifted product family `f_a(x) = prod_j h(x_j - a_j)` and a small
//! state-vector simulator realizing it as a circuit of single-qubit rotations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, LabError, Result};
use crate::torus::{wrap_unit, GridShift, TorusPoint};

/// Default cap on the number of simulated qubits.
pub const DEFAULT_QUBIT_CAP: usize = 10;

/// One-qubit building block: `1/3 + (2/3) cos(2πt)`.
///
/// The unique degree-1 trigonometric polynomial with `h(0) = 1` and
/// `h(1/3) = h(2/3) = 0`.
pub fn h_eval(t: f64) -> f64 {
    1.0 / 3.0 + 2.0 / 3.0 * (2.0 * PI * t).cos()
}

/// The rotation-axis angle `arcsin(1/sqrt(3))`.
pub fn rotation_angle() -> f64 {
    (1.0 / 3.0f64).sqrt().asin()
}

/// The atomic one-qubit circuit: prepare `|0>`, apply `exp(-iπx H)` with
/// `H = cos(φ) X + sin(φ) Z`, measure `Z`.
#[derive(Clone, Copy, Debug)]
pub struct SingleQubitCircuit {
    phi: f64,
}

impl Default for SingleQubitCircuit {
    fn default() -> Self {
        Self { phi: rotation_angle() }
    }
}

impl SingleQubitCircuit {
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The generator `cos(φ) X + sin(φ) Z` as a row-major 2x2 matrix.
    pub fn hamiltonian(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = self.phi.sin_cos();
        [
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        ]
    }

    /// `exp(-iπx H) = cos(πx) I - i sin(πx) H`, valid because `H^2 = I`.
    pub fn unitary(&self, x: f64) -> [[Complex64; 2]; 2] {
        let (s, c) = (PI * x).sin_cos();
        let h = self.hamiltonian();
        let minus_i_s = Complex64::new(0.0, -s);
        let mut u = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (r, row) in u.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                let id = if r == k { c } else { 0.0 };
                *entry = Complex64::new(id, 0.0) + minus_i_s * h[r][k];
            }
        }
        u
    }

    /// `<Z>` after applying the rotation with parameter `x` to `|0>`.
    pub fn expectation(&self, x: f64) -> f64 {
        let u = self.unitary(x);
        let (a0, a1) = (u[0][0], u[1][0]);
        a0.norm_sqr() - a1.norm_sqr()
    }
}

/// Expectation of `Z` for the atomic circuit at parameter `x`.
pub fn single_qubit_sim(x: f64) -> f64 {
    SingleQubitCircuit::default().expectation(x)
}

/// Anything that yields an expectation value in `[-1, 1]` on the n-torus.
pub trait ExpectationFn: Send + Sync {
    fn dim(&self) -> usize;

    /// Value at `x`; callers guarantee `x.dim() == self.dim()`.
    fn value_unchecked(&self, x: &TorusPoint) -> f64;

    fn value(&self, x: &TorusPoint) -> Result<f64> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.value_unchecked(x))
    }
}

/// The family member `f_a(x) = prod_j h(x_j - a_j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftedProductFunction {
    shift: GridShift,
}

impl ShiftedProductFunction {
    pub fn new(shift: GridShift) -> Result<Self> {
        if shift.dim() == 0 {
            return Err(invalid("the product function needs n >= 1"));
        }
        Ok(Self { shift })
    }

    /// The unshifted member `f_0`.
    pub fn base(n: usize) -> Result<Self> {
        Self::new(GridShift::zero(n))
    }

    pub fn n(&self) -> usize {
        self.shift.dim()
    }

    pub fn shift(&self) -> &GridShift {
        &self.shift
    }

    /// The global maximizer, which is the shift itself.
    pub fn argmax(&self) -> TorusPoint {
        TorusPoint::from(&self.shift)
    }
}

impl ExpectationFn for ShiftedProductFunction {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value_unchecked(&self, x: &TorusPoint) -> f64 {
        x.coords()
            .iter()
            .zip(self.shift.values())
            .map(|(&c, a)| h_eval(wrap_unit(c - a)))
            .product()
    }
}

/// `f_a(x)` with a dimension check.
pub fn f_eval(f: &ShiftedProductFunction, x: &TorusPoint) -> Result<f64> {
    f.value(x)
}

/// `f_a(x)` for every shift `a` at once, indexed like [`GridShift::index`].
///
/// Products are accumulated coordinate by coordinate in the same order as
/// [`f_eval`], so entries agree with it bit for bit.
pub fn family_values(x: &TorusPoint) -> Result<Vec<f64>> {
    let n = x.dim();
    let total = GridShift::count(n)?;
    let mut values = Vec::with_capacity(total);
    values.push(1.0);
    for &c in x.coords() {
        let len = values.len();
        let factors: Vec<f64> = GridShift::new(vec![0, 1, 2])
            .expect("valid trits")
            .values()
            .map(|a| h_eval(wrap_unit(c - a)))
            .collect();
        values.resize(3 * len, 0.0);
        for t in (0..3).rev() {
            for i in 0..len {
                values[t * len + i] = values[i] * factors[t];
            }
        }
    }
    Ok(values)
}

/// Applies a 2x2 gate to qubit `q` of a little-endian state vector.
fn apply_single_qubit(state: &mut [Complex64], q: usize, u: &[[Complex64; 2]; 2]) {
    let stride = 1usize << q;
    for block in state.chunks_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x0, x1) = (*a, *b);
            *a = u[0][0] * x0 + u[0][1] * x1;
            *b = u[1][0] * x0 + u[1][1] * x1;
        }
    }
}

/// Simulates the n-qubit tensor-product circuit and returns `<Z ⊗ ... ⊗ Z>`.
pub fn tensor_sim(f: &ShiftedProductFunction, x: &TorusPoint) -> Result<f64> {
    tensor_sim_with_cap(f, x, DEFAULT_QUBIT_CAP)
}

pub fn tensor_sim_with_cap(f: &ShiftedProductFunction, x: &TorusPoint, cap: usize) -> Result<f64> {
    let n = f.n();
    check_dim(n, x.dim())?;
    if n > cap {
        return Err(LabError::TooManyQubits { n, cap });
    }
    let circuit = SingleQubitCircuit::default();
    let mut state = vec![Complex64::new(0.0, 0.0); 1 << n];
    state[0] = Complex64::new(1.0, 0.0);
    for (q, (&c, a)) in x.coords().iter().zip(f.shift().values()).enumerate() {
        apply_single_qubit(&mut state, q, &circuit.unitary(c - a));
    }
    Ok(state
        .iter()
        .enumerate()
        .map(|(k, amp)| {
            let sign = if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            sign * amp.norm_sqr()
        })
        .sum())
}
