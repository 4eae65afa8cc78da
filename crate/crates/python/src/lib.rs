//! Python bindings: path simulation, sojourn functionals, constant
//! estimators, oracles and queue asymptotics. Long computations release
//! the GIL.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sojourn_core::berman::{self, BermanSettings, ConstantEstimate, Estimator, LimitSettings};
use sojourn_core::gauss::{self, DriftSpec};
use sojourn_core::lab::{self, QueueAsymptotics};
use sojourn_core::sojourn::{self as functional, RawSample};
use sojourn_core::{special, GridSpec};

fn value_error(e: sojourn_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn settings(samples: usize, seed: u64, estimator: &str, workers: usize) -> PyResult<BermanSettings> {
    let estimator = match estimator {
        "tilted" => Estimator::Tilted,
        "crude" => Estimator::Crude,
        other => return Err(PyValueError::new_err(format!("unknown estimator {other:?}; use \"tilted\" or \"crude\""))),
    };
    Ok(BermanSettings::new(samples, seed).with_estimator(estimator).with_workers(workers))
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "sojourn")]
#[derive(Clone)]
pub struct Estimate {
    pub x: f64,
    pub value: f64,
    pub std_err: f64,
    pub n_samples: usize,
    pub grid_step: f64,
    pub vanishing_by_bound: bool,
}

#[pymethods]
impl Estimate {
    fn __repr__(&self) -> String {
        format!("Estimate(x={}, value={}, std_err={})", self.x, self.value, self.std_err)
    }
}

impl From<&ConstantEstimate> for Estimate {
    fn from(e: &ConstantEstimate) -> Self {
        Self {
            x: e.x,
            value: e.value,
            std_err: e.std_err,
            n_samples: e.n_samples,
            grid_step: e.grid_step,
            vanishing_by_bound: e.vanishing_by_bound,
        }
    }
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "sojourn")]
#[derive(Clone)]
pub struct QueueClosedForms {
    pub alpha: f64,
    pub c: f64,
    pub u: f64,
    pub tau_star: f64,
    pub m_u: f64,
    pub a: f64,
    pub b: f64,
    pub v_u: f64,
    pub q_u: f64,
    pub prefactor: f64,
}

#[pymethods]
impl QueueClosedForms {
    fn __repr__(&self) -> String {
        format!("QueueClosedForms(u={}, tau_star={}, v_u={}, m_u={})", self.u, self.tau_star, self.v_u, self.m_u)
    }
}

/// P(N(0,1) > u).
#[pyfunction]
fn normal_tail(u: f64) -> f64 {
    special::normal_tail(u)
}

/// One fBm path on `n_points` equally spaced nodes of [start, end], zero at 0.
#[pyfunction]
#[pyo3(signature = (alpha, end, n_points, seed, start = 0.0))]
fn simulate_fbm(alpha: f64, end: f64, n_points: usize, seed: u64, start: f64) -> PyResult<Vec<f64>> {
    let grid = GridSpec::new(start, end, n_points).map_err(value_error)?;
    Ok(gauss::simulate_fbm(alpha, grid, seed).map_err(value_error)?.values)
}

/// cell · #{values > u}.
#[pyfunction]
fn sojourn_time(values: Vec<f64>, cell: f64, u: f64) -> f64 {
    functional::sojourn_time(&RawSample { values: &values, cell }, u)
}

/// z_x, the largest level whose sojourn exceeds x; −inf if none does.
#[pyfunction]
fn level_for_sojourn(values: Vec<f64>, cell: f64, x: f64) -> PyResult<f64> {
    if !(x >= 0.0) || !(cell > 0.0) || values.is_empty() {
        return Err(PyValueError::new_err("need x >= 0, cell > 0 and at least one value"));
    }
    Ok(functional::level_for_sojourn(&RawSample { values: &values, cell }, x).finite().unwrap_or(f64::NEG_INFINITY))
}

/// B_α^h(x, [a, b]) for each x, with drift `drift_c · t^drift_beta`.
#[pyfunction]
#[pyo3(signature = (alpha, xs, interval = (0.0, 1.0), n_grid = 257, samples = 100_000, seed = 0,
                    drift_c = 0.0, drift_beta = 1.0, estimator = "tilted", workers = 0))]
#[allow(clippy::too_many_arguments)]
fn berman_1d(
    py: Python<'_>,
    alpha: f64,
    xs: Vec<f64>,
    interval: (f64, f64),
    n_grid: usize,
    samples: usize,
    seed: u64,
    drift_c: f64,
    drift_beta: f64,
    estimator: &str,
    workers: usize,
) -> PyResult<Vec<Estimate>> {
    let s = settings(samples, seed, estimator, workers)?;
    let drift = if drift_c == 0.0 { DriftSpec::NONE } else { DriftSpec::new(drift_c, drift_beta).map_err(value_error)? };
    let out = py.detach(|| berman::estimate_berman_1d_curve(alpha, drift, &xs, interval, n_grid, &s));
    Ok(out.map_err(value_error)?.iter().map(Estimate::from).collect())
}

/// H_α as the slope of B_α(0, [0, S]) over the schedule.
#[pyfunction]
#[pyo3(signature = (alpha, schedule = vec![4.0, 8.0, 16.0], points_per_unit = 256.0, samples = 100_000, seed = 0, workers = 0))]
fn pickands(
    py: Python<'_>,
    alpha: f64,
    schedule: Vec<f64>,
    points_per_unit: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Estimate> {
    let s = settings(samples, seed, "tilted", workers)?;
    let limit = LimitSettings { schedule, points_per_unit };
    let e = py.detach(|| berman::estimate_pickands(alpha, &limit, &s)).map_err(value_error)?;
    Ok(Estimate::from(&e.estimate))
}

/// Mixed sojourn/supremum constant: (direct, product) estimates.
#[pyfunction]
#[pyo3(signature = (alphas, x, n1 = 2.0, schedule = vec![4.0, 8.0, 16.0], points_per_unit = 256.0, samples = 100_000, seed = 0, workers = 0))]
#[allow(clippy::too_many_arguments)]
fn bhat(
    py: Python<'_>,
    alphas: Vec<f64>,
    x: f64,
    n1: f64,
    schedule: Vec<f64>,
    points_per_unit: f64,
    samples: usize,
    seed: u64,
    workers: usize,
) -> PyResult<(Estimate, Estimate)> {
    let s = settings(samples, seed, "tilted", workers)?;
    let e = py
        .detach(|| berman::estimate_bhat(&alphas, x, n1, &schedule, points_per_unit, &s))
        .map_err(value_error)?;
    Ok((Estimate::from(&e.direct), Estimate::from(&e.product)))
}

/// Exact B_2(x, [0, s]) by quadrature.
#[pyfunction]
#[pyo3(signature = (x, s = 1.0, quadrature_order = 64))]
fn parabola_oracle(x: f64, s: f64, quadrature_order: usize) -> PyResult<f64> {
    berman::berman2_parabola_oracle(x, s, quadrature_order).map_err(value_error)
}

/// Exact B_1(0, [0, s]) from the Brownian supremum law.
#[pyfunction]
fn brownian_sup_oracle(s: f64) -> PyResult<f64> {
    berman::brownian_sup_oracle(s).map_err(value_error)
}

#[pyfunction]
fn queue_asymptotics(alpha: f64, c: f64, u: f64) -> PyResult<QueueClosedForms> {
    let q = QueueAsymptotics::new(alpha, c, u).map_err(value_error)?;
    Ok(QueueClosedForms {
        alpha: q.alpha,
        c: q.c,
        u: q.u,
        tau_star: q.tau_star,
        m_u: q.m_u,
        a: q.a,
        b: q.b,
        v_u: q.v_u,
        q_u: q.q_u,
        prefactor: q.prefactor(),
    })
}

/// Predicted queue sojourn probability from a mixed-constant value.
#[pyfunction]
fn queue_prefactor(alpha: f64, c: f64, u: f64, n: f64, x: f64, bhat: f64) -> PyResult<f64> {
    lab::queue_prefactor(alpha, c, u, n, x, bhat).map_err(value_error)
}

#[pymodule]
fn sojourn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Estimate>()?;
    m.add_class::<QueueClosedForms>()?;
    m.add_function(wrap_pyfunction!(normal_tail, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_fbm, m)?)?;
    m.add_function(wrap_pyfunction!(sojourn_time, m)?)?;
    m.add_function(wrap_pyfunction!(level_for_sojourn, m)?)?;
    m.add_function(wrap_pyfunction!(berman_1d, m)?)?;
    m.add_function(wrap_pyfunction!(pickands, m)?)?;
    m.add_function(wrap_pyfunction!(bhat, m)?)?;
    m.add_function(wrap_pyfunction!(parabola_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(brownian_sup_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(queue_asymptotics, m)?)?;
    m.add_function(wrap_pyfunction!(queue_prefactor, m)?)?;
    Ok(())
}
