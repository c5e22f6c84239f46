//! Python bindings for `qmcse-core`.
//!
//! Traces cross the boundary as lists of floats (and lists of bools for
//! regeneration flags). Errors surface as `ValueError`, or `OSError` for I/O.

use std::path::Path;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use qmcse_core::bm::bm_quantile_ci as core_bm;
use qmcse_core::bounds::{self, BlockChoice, BoundKind, BoundSpec, ErgodicityProfile, TargetCdf};
use qmcse_core::experiment::{self, ExperimentConfig};
use qmcse_core::io::read_trace_file;
use qmcse_core::kde::KdeConfig;
use qmcse_core::regen::{self, RegenTrace, RwRegenParams};
use qmcse_core::rng::child_rng;
use qmcse_core::samplers::{self, LinchpinInit, LinchpinSampler};
use qmcse_core::sbm::sbm_quantile_ci as core_sbm;
use qmcse_core::{Error, Method, QuantileSpec, ScalarTrace};

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type PyRes<T> = PyResult<T>;

trait IntoPy<T> {
    fn py(self) -> PyRes<T>;
}

impl<T> IntoPy<T> for qmcse_core::Result<T> {
    fn py(self) -> PyRes<T> {
        self.map_err(py_err)
    }
}

fn kde(bandwidth: Option<f64>) -> PyRes<KdeConfig> {
    bandwidth.map_or(Ok(KdeConfig::Silverman), |h| KdeConfig::fixed(h).py())
}

/// Point estimate, asymptotic variance, MCSE and confidence interval.
#[pyclass(frozen, get_all, module = "qmcse")]
struct QuantileEstimate {
    q: f64,
    point: f64,
    method: String,
    avar: f64,
    mcse: f64,
    ci_low: f64,
    ci_high: f64,
    confidence: f64,
    multiplier: f64,
    bandwidth: Option<f64>,
    batch_count: Option<usize>,
    batch_size: Option<usize>,
    block_length: Option<usize>,
}

#[pymethods]
impl QuantileEstimate {
    fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    fn __repr__(&self) -> String {
        format!(
            "QuantileEstimate(method={}, q={}, point={}, mcse={}, ci=({}, {}))",
            self.method, self.q, self.point, self.mcse, self.ci_low, self.ci_high
        )
    }
}

impl From<qmcse_core::QuantileEstimate> for QuantileEstimate {
    fn from(e: qmcse_core::QuantileEstimate) -> Self {
        Self {
            q: e.q,
            point: e.point,
            method: e.method.tag().to_string(),
            avar: e.avar,
            mcse: e.mcse,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            confidence: e.confidence,
            multiplier: e.multiplier,
            bandwidth: e.bandwidth,
            batch_count: e.batch_count,
            batch_size: e.batch_size,
            block_length: e.block_length,
        }
    }
}

fn trace(values: Vec<f64>) -> PyRes<ScalarTrace> {
    ScalarTrace::new(values).py()
}

/// Empirical quantile `Y_(j)` with `j - 1 < nq <= j`.
#[pyfunction]
fn empirical_quantile(values: Vec<f64>, q: f64) -> PyRes<f64> {
    qmcse_core::empirical_quantile(&trace(values)?, QuantileSpec::new(q).py()?).py()
}

#[pyfunction]
fn ecdf(values: Vec<f64>, y: f64) -> PyRes<f64> {
    qmcse_core::ecdf(&trace(values)?, y).py()
}

/// Batch-means interval.
#[pyfunction]
#[pyo3(signature = (values, q, confidence = 0.95, bandwidth = None))]
fn bm_quantile_ci(values: Vec<f64>, q: f64, confidence: f64, bandwidth: Option<f64>) -> PyRes<QuantileEstimate> {
    core_bm(&trace(values)?, QuantileSpec::new(q).py()?, confidence, kde(bandwidth)?).py().map(Into::into)
}

/// Subsampling-bootstrap interval.
#[pyfunction]
#[pyo3(signature = (values, q, confidence = 0.95))]
fn sbm_quantile_ci(values: Vec<f64>, q: f64, confidence: f64) -> PyRes<QuantileEstimate> {
    core_sbm(&trace(values)?, QuantileSpec::new(q).py()?, confidence).py().map(Into::into)
}

/// Regenerative interval; `regen[i]` marks a regeneration after step `i`.
#[pyfunction]
#[pyo3(signature = (values, regen, q, confidence = 0.95, bandwidth = None))]
fn rs_quantile_ci(
    values: Vec<f64>,
    regen: Vec<bool>,
    q: f64,
    confidence: f64,
    bandwidth: Option<f64>,
) -> PyRes<QuantileEstimate> {
    let trace = RegenTrace::new(values, regen).py()?;
    regen::rs_quantile_ci(&trace, QuantileSpec::new(q).py()?, confidence, kde(bandwidth)?).py().map(Into::into)
}

/// One estimate per `(q, method)` for a trace CSV.
#[pyfunction]
#[pyo3(signature = (path, quantiles, methods = vec!["BM".to_string(), "SBM".to_string()], confidence = 0.95, bandwidth = None))]
fn quantile_report(
    path: &str,
    quantiles: Vec<f64>,
    methods: Vec<String>,
    confidence: f64,
    bandwidth: Option<f64>,
) -> PyRes<Vec<QuantileEstimate>> {
    let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<qmcse_core::Result<Vec<_>>>().py()?;
    let file = read_trace_file(Path::new(path)).py()?;
    let rows = experiment::quantile_report(&file, &quantiles, &methods, confidence, kde(bandwidth)?).py()?;
    Ok(rows
        .into_iter()
        .map(|r| QuantileEstimate {
            q: r.q,
            point: r.point,
            method: r.method.tag().to_string(),
            avar: r.avar,
            mcse: r.mcse,
            ci_low: r.ci_low,
            ci_high: r.ci_high,
            confidence: r.confidence,
            multiplier: r.multiplier,
            bandwidth: r.bandwidth,
            batch_count: r.batch_count,
            batch_size: r.batch_size,
            block_length: r.block_length,
        })
        .collect())
}

/// Regenerative random walk on `t(v)`; returns `(values, regen_flags)`.
#[pyfunction]
#[pyo3(signature = (v, sigma, tours, seed = 0))]
fn run_regenerative_rw(v: f64, sigma: f64, tours: usize, seed: u64) -> PyRes<(Vec<f64>, Vec<bool>)> {
    let params = RwRegenParams::new(v, sigma).py()?;
    let trace = regen::run_regenerative_rw(&params, tours, &mut child_rng(seed, 0)).py()?;
    Ok((trace.values().to_vec(), trace.flags().to_vec()))
}

/// Plain random walk on `t(v)` started at 0.
#[pyfunction]
#[pyo3(signature = (v, sigma, n, seed = 0))]
fn run_rw(v: f64, sigma: f64, n: usize, seed: u64) -> PyRes<Vec<f64>> {
    samplers::run_rw(v, sigma, n, &mut child_rng(seed, 0)).py().map(|(x, _)| x)
}

/// `x`-chain of the linchpin sampler for the `t(4)` target.
#[pyfunction]
#[pyo3(signature = (n, seed = 0, init = "origin"))]
fn run_linchpin(n: usize, seed: u64, init: &str) -> PyRes<Vec<f64>> {
    let init: LinchpinInit = init.parse().py()?;
    Ok(LinchpinSampler::new().run_x(n, init, &mut child_rng(seed, 0)))
}

/// Regeneration probability for an accepted move `x -> y` with default window settings.
#[pyfunction]
fn regen_prob_accepted(x: f64, y: f64, v: f64, sigma: f64) -> PyRes<f64> {
    Ok(regen::regen_prob_accepted(x, y, &RwRegenParams::new(v, sigma).py()?))
}

/// `gamma(delta, eps)` for a `t(df)` functional.
#[pyfunction]
#[pyo3(signature = (q, eps, delta, df = 4.0))]
fn gamma_eps(q: f64, eps: f64, delta: f64, df: f64) -> PyRes<f64> {
    bounds::gamma_eps(&TargetCdf::student_t(df, q).py()?, q, eps, delta).py()
}

#[pyfunction]
fn bound_polynomial(n: u64, a: u64, gamma: f64, m: f64, epim: f64) -> PyRes<f64> {
    bounds::bound_polynomial(n, a, gamma, &ErgodicityProfile::polynomial(m, epim).py()?).py()
}

#[pyfunction]
#[pyo3(signature = (n, a, gamma, lam = None, n0 = 1))]
fn bound_uniform(n: u64, a: u64, gamma: f64, lam: Option<f64>, n0: u64) -> PyRes<f64> {
    let profile = ErgodicityProfile::uniform(lam.unwrap_or_else(samplers::linchpin_lambda), n0).py()?;
    bounds::bound_uniform(n, a, gamma, &profile).py()
}

#[pyfunction]
#[pyo3(signature = (n, gamma, lam = None, n0 = 1))]
fn bound_uniform_improved(n: u64, gamma: f64, lam: Option<f64>, n0: u64) -> PyRes<f64> {
    let profile = ErgodicityProfile::uniform(lam.unwrap_or_else(samplers::linchpin_lambda), n0).py()?;
    bounds::bound_uniform_improved(n, gamma, &profile).py()
}

/// Smallest `n` with bound at most `target`. `kind` is `polynomial`,
/// `uniform` (optimized over the a-grid) or `uniform-improved`.
#[pyfunction]
#[pyo3(signature = (kind, gamma, target, lam = None, n0 = 1, m = None, epim = None))]
fn min_sample_size(
    kind: &str,
    gamma: f64,
    target: f64,
    lam: Option<f64>,
    n0: u64,
    m: Option<f64>,
    epim: Option<f64>,
) -> PyRes<u64> {
    let lam = lam.unwrap_or_else(samplers::linchpin_lambda);
    let (kind, profile) = match kind {
        "polynomial" => {
            let (Some(m), Some(epim)) = (m, epim) else {
                return Err(PyValueError::new_err("polynomial bound needs m and epim"));
            };
            (BoundKind::Polynomial(BlockChoice::Grid), ErgodicityProfile::polynomial(m, epim).py()?)
        }
        "uniform" => (BoundKind::Uniform(BlockChoice::Grid), ErgodicityProfile::uniform(lam, n0).py()?),
        "uniform-improved" => (BoundKind::UniformImproved, ErgodicityProfile::uniform(lam, n0).py()?),
        other => return Err(PyValueError::new_err(format!("unknown bound kind {other:?}"))),
    };
    bounds::min_sample_size(&BoundSpec { kind, gamma, profile }, target).py()
}

/// Runs an experiment described by a JSON config and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (config_json, workers = None))]
fn run_experiment(py: Python<'_>, config_json: &str, workers: Option<usize>) -> PyRes<String> {
    let config = ExperimentConfig::from_json(config_json).py()?;
    let report = py.detach(|| experiment::run_experiment(&config, workers)).py()?;
    report.to_json().py()
}

#[pyfunction]
fn linchpin_lambda() -> f64 {
    samplers::linchpin_lambda()
}

#[pymodule]
fn qmcse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<QuantileEstimate>()?;
    m.add_function(wrap_pyfunction!(empirical_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(ecdf, m)?)?;
    m.add_function(wrap_pyfunction!(bm_quantile_ci, m)?)?;
    m.add_function(wrap_pyfunction!(sbm_quantile_ci, m)?)?;
    m.add_function(wrap_pyfunction!(rs_quantile_ci, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_regenerative_rw, m)?)?;
    m.add_function(wrap_pyfunction!(run_rw, m)?)?;
    m.add_function(wrap_pyfunction!(run_linchpin, m)?)?;
    m.add_function(wrap_pyfunction!(regen_prob_accepted, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_eps, m)?)?;
    m.add_function(wrap_pyfunction!(bound_polynomial, m)?)?;
    m.add_function(wrap_pyfunction!(bound_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(bound_uniform_improved, m)?)?;
    m.add_function(wrap_pyfunction!(min_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(linchpin_lambda, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
