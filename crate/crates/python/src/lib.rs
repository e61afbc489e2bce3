//! Python bindings for the query-complexity laboratory.
//!
//! Points are plain lists of floats, grid shifts are lists of trits (0, 1, 2)
//! and sample outcomes are the integers +1 / -1.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use querylab_core::circuit::ExpectationFn;
use querylab_core::experiment;
use querylab_core::game::{self, CdfRow};
use querylab_core::info::{self, Identification};
use querylab_core::training::{self, TrainerResult};
use querylab_core::{
    GridShift, LabError, Outcome, PlateauRegion, ShiftedProductFunction, StrategyKind, TorusPoint,
    TrainerKind,
};

fn py_err(e: LabError) -> PyErr {
    match e {
        LabError::Inconsistent(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn shift(trits: Vec<u8>) -> PyResult<GridShift> {
    GridShift::new(trits).map_err(py_err)
}

fn trit_list(a: &GridShift) -> Vec<u32> {
    a.trits().iter().map(|&t| t as u32).collect()
}

fn member(trits: Vec<u8>) -> PyResult<ShiftedProductFunction> {
    ShiftedProductFunction::new(shift(trits)?).map_err(py_err)
}

fn outcome(v: i64) -> PyResult<Outcome> {
    Outcome::from_sign(v).map_err(py_err)
}

fn strategy(name: &str, n: usize) -> PyResult<StrategyKind> {
    match name {
        "fixed" => Ok(StrategyKind::Fixed(TorusPoint::zeros(n))),
        other => StrategyKind::parse(other).map_err(py_err),
    }
}

fn cdf_rows<'py>(py: Python<'py>, rows: &[CdfRow]) -> PyResult<Vec<Bound<'py, PyDict>>> {
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("m", r.m)?;
            d.set_item("empirical", r.empirical)?;
            d.set_item("stderr", r.stderr)?;
            d.set_item("bound", r.bound)?;
            d.set_item("violated", r.violated)?;
            Ok(d)
        })
        .collect()
}

/// Circular distance between two reals on the unit circle.
#[pyfunction]
fn bohr_dist(u: f64, v: f64) -> f64 {
    querylab_core::bohr_dist(u, v)
}

/// Nearest grid shift to `x` and whether any coordinate was a tie.
#[pyfunction]
fn round_to_grid(x: Vec<f64>) -> (Vec<u32>, bool) {
    let (a, tie) = querylab_core::round_to_grid(&TorusPoint::new(x));
    (trit_list(&a), tie)
}

/// Number of coordinates of `x` at distance >= 1/6 from the shift.
#[pyfunction]
fn hamming_d(shift_trits: Vec<u8>, x: Vec<f64>) -> PyResult<usize> {
    querylab_core::hamming_d(&shift(shift_trits)?, &TorusPoint::new(x)).map_err(py_err)
}

#[pyfunction]
fn h_eval(t: f64) -> f64 {
    querylab_core::h_eval(t)
}

/// Exact value of the family member with the given shift at `x`.
#[pyfunction]
fn f_eval(shift_trits: Vec<u8>, x: Vec<f64>) -> PyResult<f64> {
    querylab_core::f_eval(&member(shift_trits)?, &TorusPoint::new(x)).map_err(py_err)
}

#[pyfunction]
fn single_qubit_sim(x: f64) -> f64 {
    querylab_core::single_qubit_sim(x)
}

/// State-vector simulation of the n-qubit product circuit.
#[pyfunction]
fn tensor_sim(shift_trits: Vec<u8>, x: Vec<f64>) -> PyResult<f64> {
    querylab_core::tensor_sim(&member(shift_trits)?, &TorusPoint::new(x)).map_err(py_err)
}

#[pyfunction]
fn in_plateau(center: Vec<u8>, x: Vec<f64>) -> PyResult<bool> {
    let region = PlateauRegion::new(shift(center)?);
    querylab_core::in_plateau(&region, &TorusPoint::new(x)).map_err(py_err)
}

/// `{"n", "delta", "p_exact", "p_hoeffding"}` for dimension `n`.
#[pyfunction]
fn bounds(py: Python<'_>, n: usize) -> PyResult<Bound<'_, PyDict>> {
    let b = querylab_core::bounds(n).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("n", b.n)?;
    d.set_item("delta", b.delta)?;
    d.set_item("p_exact", b.p_exact)?;
    d.set_item("p_hoeffding", b.p_hoeffding)?;
    Ok(d)
}

/// Seeded stream of uniform draws on [-1, 1).
#[pyclass(name = "RandomStack", skip_from_py_object)]
#[derive(Clone)]
struct PyRandomStack {
    inner: querylab_core::RandomStack,
}

#[pymethods]
impl PyRandomStack {
    #[new]
    #[pyo3(signature = (seed, stream = 0))]
    fn new(seed: u64, stream: u64) -> Self {
        Self { inner: querylab_core::RandomStack::new(seed, stream) }
    }

    fn pop(&mut self) -> f64 {
        self.inner.pop()
    }

    fn pop_point(&mut self, n: usize) -> Vec<f64> {
        self.inner.pop_point(n).coords().to_vec()
    }

    fn pop_shift(&mut self, n: usize) -> Vec<u32> {
        trit_list(&self.inner.pop_shift(n))
    }

    #[getter]
    fn draw_index(&self) -> u64 {
        self.inner.draw_index()
    }

    fn clone_stack(&self) -> Self {
        self.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "RandomStack(seed={}, stream={}, draw_index={})",
            self.inner.seed(),
            self.inner.stream(),
            self.inner.draw_index()
        )
    }
}

/// One ±1 sample with mean f(x), consuming one draw.
#[pyfunction]
fn sample_query(shift_trits: Vec<u8>, x: Vec<f64>, stack: &mut PyRandomStack) -> PyResult<i8> {
    let f = member(shift_trits)?;
    querylab_core::sample_query(&f, &TorusPoint::new(x), &mut stack.inner)
        .map(Outcome::value)
        .map_err(py_err)
}

/// An oracle that has already answered its single evaluation query.
struct Answered {
    n: usize,
    value: f64,
}

impl ExpectationFn for Answered {
    fn dim(&self) -> usize {
        self.n
    }

    fn value_unchecked(&self, _x: &TorusPoint) -> f64 {
        self.value
    }
}

/// Draws one random point, asks `oracle(x)` once, and matches the answer
/// against every family member.
///
/// Returns `{"shift", "argmax", "point"}` on a unique match and
/// `{"ambiguous": [...], "point"}` otherwise. Raises `RuntimeError` when no
/// member matches.
#[pyfunction]
#[pyo3(signature = (n, oracle, stack, tol = 1e-9))]
fn omnipotent_identify<'py>(
    py: Python<'py>,
    n: usize,
    oracle: &Bound<'py, PyAny>,
    stack: &mut PyRandomStack,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let x = stack.inner.pop_point(n);
    let value: f64 = oracle.call1((x.coords().to_vec(),))?.extract()?;
    let answered = Answered { n, value };
    let d = PyDict::new(py);
    d.set_item("point", x.coords().to_vec())?;
    match info::identify_at(n, &answered, &x, tol).map_err(py_err)? {
        Identification::Unique { shift, argmax } => {
            d.set_item("shift", trit_list(&shift))?;
            d.set_item("argmax", argmax.coords().to_vec())?;
        }
        Identification::Ambiguous(set) => {
            let set: Vec<Vec<u32>> = set.iter().map(trit_list).collect();
            d.set_item("ambiguous", set)?;
        }
    }
    Ok(d)
}

/// Exact posterior over all 3^n shifts, indexed little-endian by trits.
#[pyclass(name = "Posterior", skip_from_py_object)]
#[derive(Clone)]
struct PyPosterior {
    inner: info::Posterior,
}

#[pymethods]
impl PyPosterior {
    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        Ok(Self { inner: info::Posterior::uniform(n).map_err(py_err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn prob(&self, shift_trits: Vec<u8>) -> PyResult<f64> {
        Ok(self.inner.prob(&shift(shift_trits)?))
    }

    fn entropy_bits(&self) -> f64 {
        self.inner.entropy_bits()
    }

    /// Bayes update on one sample outcome (+1 or -1) at `x`.
    fn update(&self, x: Vec<f64>, result: i64) -> PyResult<Self> {
        let inner = info::posterior_update(&self.inner, &TorusPoint::new(x), outcome(result)?)
            .map_err(py_err)?;
        Ok(Self { inner })
    }
}

/// `(mi_bits, stderr)` after `m` sample queries of a non-adaptive strategy
/// ("uniform", "sweep" or "fixed").
#[pyfunction]
#[pyo3(signature = (n, m, transcripts, seed, strategy = "uniform"))]
fn transcript_mi(
    py: Python<'_>,
    n: usize,
    m: usize,
    transcripts: usize,
    seed: u64,
    strategy: &str,
) -> PyResult<(f64, f64)> {
    let kind = self::strategy(strategy, n)?;
    let row = py
        .detach(|| info::transcript_mi(n, &kind, m, transcripts, seed))
        .map_err(py_err)?;
    Ok((row.mi_bits, row.stderr))
}

/// Exact mutual information for fixed query points by full enumeration.
#[pyfunction]
fn exact_transcript_mi(n: usize, points: Vec<Vec<f64>>) -> PyResult<f64> {
    let points: Vec<TorusPoint> = points.into_iter().map(TorusPoint::new).collect();
    info::exact_transcript_mi(n, &points).map_err(py_err)
}

/// Empirical win-time CDF of the plateau game against `p_exact(n)·m`.
#[pyfunction]
#[pyo3(signature = (n, games, m_max, seed, strategy = "uniform"))]
fn estimate_win_cdf<'py>(
    py: Python<'py>,
    n: usize,
    games: usize,
    m_max: usize,
    seed: u64,
    strategy: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kind = self::strategy(strategy, n)?;
    let rows = py
        .detach(|| game::estimate_win_cdf(n, &kind, games, m_max, seed))
        .map_err(py_err)?;
    cdf_rows(py, &rows)
}

fn trainer_dict<'py>(py: Python<'py>, r: &TrainerResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("algo", r.algo.name())?;
    d.set_item("n", r.n)?;
    d.set_item("hidden", trit_list(&r.hidden))?;
    d.set_item("queries_total", r.queries_total)?;
    d.set_item("first_exit", r.first_exit)?;
    d.set_item("output", r.output.as_ref().map(|x| x.coords().to_vec()))?;
    d.set_item("succeeded", r.succeeded)?;
    d.set_item("budget", r.budget)?;
    let transcript: Vec<(Vec<f64>, i8)> = r
        .transcript
        .entries()
        .iter()
        .map(|(x, o)| (x.coords().to_vec(), o.value()))
        .collect();
    d.set_item("transcript", transcript)?;
    Ok(d)
}

/// Trains `algo` ("random", "spsa", "pshift") against the member with the
/// given shift. `alpha` defaults to `1 - 2(2/3)^(n/2)`.
#[pyfunction]
#[pyo3(signature = (algo, hidden, budget, stack, alpha = None))]
fn run_trainer<'py>(
    py: Python<'py>,
    algo: &str,
    hidden: Vec<u8>,
    budget: usize,
    stack: &mut PyRandomStack,
    alpha: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = TrainerKind::parse(algo).map_err(py_err)?;
    let f = member(hidden)?;
    let alpha = match alpha {
        Some(a) => a,
        None => training::default_alpha(f.n()).map_err(py_err)?,
    };
    let inner = &mut stack.inner;
    let r = py
        .detach(|| training::run_trainer(kind, &f, alpha, budget, inner))
        .map_err(py_err)?;
    trainer_dict(py, &r)
}

/// `(probability, stderr, bound)` of coupled-run divergence within `m` queries.
#[pyfunction]
#[pyo3(signature = (algo, n, m, trials, seed, eta = 0.0))]
fn divergence_experiment(
    py: Python<'_>,
    algo: &str,
    n: usize,
    m: usize,
    trials: usize,
    seed: u64,
    eta: f64,
) -> PyResult<(f64, f64, f64)> {
    let kind = TrainerKind::parse(algo).map_err(py_err)?;
    let est = py
        .detach(|| training::divergence_experiment(kind, n, m, trials, eta, seed))
        .map_err(py_err)?;
    Ok((est.probability, est.stderr, est.bound))
}

/// CDF of the first query outside the hidden plateau.
#[pyfunction]
fn exit_time_experiment<'py>(
    py: Python<'py>,
    algo: &str,
    n: usize,
    m_max: usize,
    trials: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kind = TrainerKind::parse(algo).map_err(py_err)?;
    let rows = py
        .detach(|| training::exit_time_experiment(kind, n, m_max, trials, seed))
        .map_err(py_err)?;
    cdf_rows(py, &rows)
}

/// Runs the `querylab` command line with `argv` (without the program name)
/// and returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn run_command(py: Python<'_>, argv: Vec<String>) -> (i32, String, String) {
    py.detach(|| {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let full = std::iter::once("querylab".to_string()).chain(argv);
        let code = experiment::run_command_with(full, &mut out, &mut err);
        (
            code,
            String::from_utf8_lossy(&out).into_owned(),
            String::from_utf8_lossy(&err).into_owned(),
        )
    })
}

#[pymodule]
fn querylab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_SEED", experiment::DEFAULT_SEED)?;
    m.add_class::<PyRandomStack>()?;
    m.add_class::<PyPosterior>()?;
    m.add_function(wrap_pyfunction!(bohr_dist, m)?)?;
    m.add_function(wrap_pyfunction!(round_to_grid, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_d, m)?)?;
    m.add_function(wrap_pyfunction!(h_eval, m)?)?;
    m.add_function(wrap_pyfunction!(f_eval, m)?)?;
    m.add_function(wrap_pyfunction!(single_qubit_sim, m)?)?;
    m.add_function(wrap_pyfunction!(tensor_sim, m)?)?;
    m.add_function(wrap_pyfunction!(in_plateau, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(sample_query, m)?)?;
    m.add_function(wrap_pyfunction!(omnipotent_identify, m)?)?;
    m.add_function(wrap_pyfunction!(transcript_mi, m)?)?;
    m.add_function(wrap_pyfunction!(exact_transcript_mi, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_win_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(run_trainer, m)?)?;
    m.add_function(wrap_pyfunction!(divergence_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(exit_time_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
