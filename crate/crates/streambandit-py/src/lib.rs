//! Python bindings for the streambandit engine: schedule calculators,
//! instance builders, the algorithm dispatcher, single seeded runs, the
//! experiment simulator, and the referee fuzzer.
//!
//! Complex results cross the boundary as native dicts/lists or (for the
//! experiment summary) as JSON text, so the Python side needs nothing
//! beyond the standard library.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use ::streambandit::harness::{self, AlgorithmId, Experiment, GridPoint, InstanceSource};
use ::streambandit::instances::{hard_instance, make_instance, HardFamily, InstanceSpec};
use ::streambandit::streamenv::RunRecord;
use ::streambandit::{cli, mathkit};

fn pyerr(e: ::streambandit::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A fully specified bandit instance: per-arm means plus one arrival
/// order per pass.
#[pyclass(frozen)]
struct Instance {
    inner: InstanceSpec,
}

#[pymethods]
impl Instance {
    #[new]
    fn new(means: Vec<f64>, orders: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(Instance { inner: make_instance(means, orders).map_err(pyerr)? })
    }

    /// Every arm at mean 1/2, identity arrival orders.
    #[staticmethod]
    fn all_fair(n: usize, passes: usize, seed: u64) -> PyResult<Self> {
        let inner = hard_instance(&HardFamily::all_fair(), n, passes, seed).map_err(pyerr)?;
        Ok(Instance { inner })
    }

    /// Arm `j` planted at 1/2 + eps[level]; identity orders up to `level`,
    /// `j` arriving last in pass level+1, seeded shuffles afterwards.
    #[staticmethod]
    fn planted(
        n: usize,
        passes: usize,
        j: usize,
        level: usize,
        eps: Vec<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let inner =
            hard_instance(&HardFamily::planted(j, level, eps), n, passes, seed).map_err(pyerr)?;
        Ok(Instance { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn passes(&self) -> usize {
        self.inner.passes()
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means.clone()
    }

    #[getter]
    fn orders(&self) -> Vec<Vec<usize>> {
        self.inner.orders.clone()
    }

    #[getter]
    fn best_mean(&self) -> f64 {
        self.inner.best_mean()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(pyerr)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Instance { inner: InstanceSpec::from_json(text).map_err(pyerr)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(n={}, passes={}, best_mean={})",
            self.inner.n,
            self.inner.passes(),
            self.inner.best_mean()
        )
    }
}

fn record_to_dict<'py>(py: Python<'py>, rec: &RunRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("pseudo_regret", rec.pseudo_regret)?;
    d.set_item("rounds_used", rec.rounds_used)?;
    d.set_item("pass_rounds", rec.pass_rounds.clone())?;
    d.set_item("exploit_rounds", rec.exploit_rounds)?;
    d.set_item("final_memory_means", rec.final_memory_means.clone())?;
    d.set_item("pass_best_means", rec.pass_best_means.clone())?;
    d.set_item("repeat_drops", rec.repeat_drops)?;
    d.set_item("violation", rec.violation)?;
    d.set_item("seed", rec.seed)?;
    d.set_item("truncated_stage", rec.truncated_stage.clone())?;
    Ok(d)
}

/// Which player the memory rule dispatches for (n, m).
#[pyfunction]
fn select_algorithm(n: usize, m: usize) -> PyResult<String> {
    Ok(harness::select_algorithm(n, m).map_err(pyerr)?.name().to_string())
}

/// The theoretical regret exponent of a P-pass player.
#[pyfunction]
fn slope_target(big_p: u32) -> f64 {
    harness::slope_target(big_p)
}

/// Iterations of clamped ln until the value reaches 1.
#[pyfunction]
fn log_star(x: f64) -> PyResult<u32> {
    mathkit::log_star(x).map_err(pyerr)
}

/// k-fold iterated logarithm, clamped at 1.
#[pyfunction]
fn ilog(k: u32, x: f64) -> PyResult<f64> {
    mathkit::ilog(k, x).map_err(pyerr)
}

/// Per-pass accuracy targets and admission-duel lengths of the
/// small-memory player, as {"eps": [...], "s": [...], "r": levels}.
#[pyfunction]
#[pyo3(signature = (n, m, big_p, t, delta = 0.25))]
fn schedule_small<'py>(
    py: Python<'py>,
    n: u64,
    m: u64,
    big_p: u32,
    t: u64,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sched = mathkit::schedule_small_with_delta(n, m, big_p, t, delta).map_err(pyerr)?;
    let d = PyDict::new(py);
    d.set_item("eps", sched.eps.clone())?;
    d.set_item("s", sched.s.clone())?;
    d.set_item("r", sched.r)?;
    Ok(d)
}

/// Level widths and sample counts of the identification ladder, plus its
/// deterministic worst-case sample cap.
#[pyfunction]
#[pyo3(signature = (n, r, eps, delta = 0.25))]
fn schedule_bai<'py>(
    py: Python<'py>,
    n: u64,
    r: usize,
    eps: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sched = mathkit::schedule_bai(n, r, eps, delta).map_err(pyerr)?;
    let cap = mathkit::bai_sample_cap(n, &sched);
    let d = PyDict::new(py);
    d.set_item("c", sched.c.clone())?;
    d.set_item("s", sched.s.clone())?;
    d.set_item("sample_cap", cap)?;
    Ok(d)
}

/// The hard family's per-pass gap schedule (raw formula, c1 defaulting
/// to 1), one entry per pass.
#[pyfunction]
#[pyo3(signature = (n, m, big_p, t, c1 = 1.0))]
fn lower_bound_eps(n: u64, m: u64, big_p: u32, t: f64, c1: f64) -> PyResult<Vec<f64>> {
    ::streambandit::instances::lower_bound_eps_raw(n, m, big_p, t, c1).map_err(pyerr)
}

/// One seeded run of the named player on an explicit instance with
/// memory m and budget t; returns the run record as a dict.
#[pyfunction]
fn run_single<'py>(
    py: Python<'py>,
    algorithm: &str,
    instance: &Instance,
    m: usize,
    t: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let alg = AlgorithmId::parse(algorithm).map_err(pyerr)?;
    let point = GridPoint { n: instance.inner.n, m, big_p: instance.inner.passes(), t };
    let source = InstanceSource::Explicit { spec: instance.inner.clone() };
    let rec = harness::run_one(alg, &source, point, 0, seed).map_err(pyerr)?;
    record_to_dict(py, &rec)
}

/// Run a flat-JSON experiment config (the CLI's schema) and return the
/// summary as JSON text.
#[pyfunction]
fn simulate(config_json: &str) -> PyResult<String> {
    let exp: Experiment = cli::load_experiment(config_json, &[]).map_err(pyerr)?;
    let summary = harness::simulate(&exp).map_err(pyerr)?;
    summary.to_json().map_err(pyerr)
}

/// Like `simulate`, but also return the per-repetition CSV text:
/// (summary_json, csv).
#[pyfunction]
fn simulate_csv(config_json: &str) -> PyResult<(String, String)> {
    let exp: Experiment = cli::load_experiment(config_json, &[]).map_err(pyerr)?;
    let (summary, csv) = harness::simulate_full(&exp).map_err(pyerr)?;
    Ok((summary.to_json().map_err(pyerr)?, csv))
}

/// Fuzz the referee across randomized configurations of every player.
#[pyfunction]
#[pyo3(signature = (configs = 1000, seed = 0))]
fn fuzz<'py>(py: Python<'py>, configs: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let report = harness::fuzz_referee(configs, seed);
    let d = PyDict::new(py);
    d.set_item("configs_run", report.configs_run)?;
    d.set_item("violations", report.violations)?;
    d.set_item("controls", report.controls)?;
    d.set_item("controls_tripped", report.controls_tripped)?;
    d.set_item("notes", report.notes.clone())?;
    Ok(d)
}

#[pymodule]
fn streambandit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(select_algorithm, m)?)?;
    m.add_function(wrap_pyfunction!(slope_target, m)?)?;
    m.add_function(wrap_pyfunction!(log_star, m)?)?;
    m.add_function(wrap_pyfunction!(ilog, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_small, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_bai, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_eps, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_csv, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add("CSV_SCHEMA_VERSION", harness::CSV_SCHEMA_VERSION)?;
    m.add("SUMMARY_SCHEMA_VERSION", harness::SUMMARY_SCHEMA_VERSION)?;
    Ok(())
}
