//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists; configuration is accepted as a dict of `SystemConfig` fields.

use engine::allocation::{self, LogBase, OptimizerOptions, PaScheme};
use engine::coverage::{self as cov, CoverageOptions, NomaSetup, Ordering};
use engine::experiments::{self, ValidationOptions, DEFAULT_KAPPA, DEFAULT_SEED};
use engine::geometry::{ConstellationModel, WalkerDeltaParams};
use engine::montecarlo::{self, McOptions};
use engine::{db_to_linear, FadingModel, Network, SystemConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn err(e: engine::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_config(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<SystemConfig> {
    let cfg = match config {
        None => SystemConfig::default(),
        Some(d) => {
            let text: String = py.import("json")?.call_method1("dumps", (d,))?.extract()?;
            SystemConfig::from_json_str(&text).map_err(err)?
        }
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn network(py: Python<'_>, config: Option<&Bound<'_, PyDict>>, kappa: u32) -> PyResult<Network> {
    let cfg = parse_config(py, config)?;
    Network::new(cfg, FadingModel::nakagami(kappa).map_err(err)?).map_err(err)
}

fn parse_ordering(s: &str) -> PyResult<Ordering> {
    match s.to_ascii_lowercase().as_str() {
        "msp" => Ok(Ordering::Msp),
        "isinr" => Ok(Ordering::Isinr),
        other => Err(PyValueError::new_err(format!("unknown ordering {other:?}; expected 'msp' or 'isinr'"))),
    }
}

/// `pa` is "etpa", "erpa" or an explicit coefficient list.
fn parse_pa(pa: &Bound<'_, PyAny>) -> PyResult<PaScheme> {
    if let Ok(name) = pa.extract::<String>() {
        return match name.to_ascii_lowercase().as_str() {
            "etpa" => Ok(PaScheme::etpa()),
            "erpa" => Ok(PaScheme::erpa()),
            other => Err(PyValueError::new_err(format!("unknown power allocation {other:?}"))),
        };
    }
    Ok(PaScheme::fpa(pa.extract::<Vec<f64>>()?))
}

fn parse_base(bits: bool) -> LogBase {
    if bits {
        LogBase::Two
    } else {
        LogBase::E
    }
}

struct Problem {
    net: Network,
    setup: NomaSetup,
}

#[allow(clippy::too_many_arguments)]
fn problem(
    py: Python<'_>,
    n: usize,
    ordering: &str,
    pa: &Bound<'_, PyAny>,
    theta_db: f64,
    ri: f64,
    kappa: u32,
    config: Option<&Bound<'_, PyDict>>,
) -> PyResult<Problem> {
    let net = network(py, config, kappa)?;
    let coefficients = parse_pa(pa)?.coefficients(n, &net).map_err(err)?;
    let setup = NomaSetup::uniform(parse_ordering(ordering)?, coefficients, ri, db_to_linear(theta_db)).map_err(err)?;
    Ok(Problem { net, setup })
}

/// The reference parameter set as a dict.
#[pyfunction]
fn default_config(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &SystemConfig::default())
}

/// Analytic per-user coverage at a uniform threshold.
#[pyfunction]
#[pyo3(signature = (n=3, ordering="isinr", pa=None, theta_db=-5.0, ri=0.0, kappa=DEFAULT_KAPPA, config=None, unconditional=false, rel_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn coverage<'py>(
    py: Python<'py>,
    n: usize,
    ordering: &str,
    pa: Option<&Bound<'py, PyAny>>,
    theta_db: f64,
    ri: f64,
    kappa: u32,
    config: Option<&Bound<'py, PyDict>>,
    unconditional: bool,
    rel_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let default_pa = "erpa".into_pyobject(py)?.into_any();
    let p = problem(py, n, ordering, pa.unwrap_or(&default_pa), theta_db, ri, kappa, config)?;
    let opts = CoverageOptions { rel_tol, ..Default::default() };
    let mut result = py.detach(|| cov::coverage(&p.setup, &p.net, &opts)).map_err(err)?;
    if unconditional {
        result = cov::unconditional_coverage(&result, &p.net.derived).map_err(err)?;
    }
    to_py(py, &result)
}

/// Analytic sum spectral efficiency; `oma=True` gives the orthogonal baseline.
#[pyfunction]
#[pyo3(signature = (n=3, ordering="isinr", pa=None, theta_db=-5.0, ri=0.0, kappa=DEFAULT_KAPPA, config=None, oma=false, bits=false))]
#[allow(clippy::too_many_arguments)]
fn sum_se<'py>(
    py: Python<'py>,
    n: usize,
    ordering: &str,
    pa: Option<&Bound<'py, PyAny>>,
    theta_db: f64,
    ri: f64,
    kappa: u32,
    config: Option<&Bound<'py, PyDict>>,
    oma: bool,
    bits: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let default_pa = "erpa".into_pyobject(py)?.into_any();
    let p = problem(py, n, ordering, pa.unwrap_or(&default_pa), theta_db, ri, kappa, config)?;
    let opts = CoverageOptions::default();
    let base = parse_base(bits);
    let result = py
        .detach(|| {
            if oma {
                allocation::sum_se_oma(&p.setup.thresholds, p.setup.ordering, &p.net, &opts, base)
            } else {
                allocation::sum_se_noma(&p.setup, &p.net, &opts, base)
            }
        })
        .map_err(err)?;
    to_py(py, &result)
}

/// Grid search for the sum-SE-optimal power split over each user count in `counts`.
#[pyfunction]
#[pyo3(signature = (theta_db, ordering="isinr", counts=vec![2, 3], kappa=DEFAULT_KAPPA, ri=0.0, step=0.05, config=None, bits=false))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    theta_db: f64,
    ordering: &str,
    counts: Vec<usize>,
    kappa: u32,
    ri: f64,
    step: f64,
    config: Option<&Bound<'py, PyDict>>,
    bits: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let net = network(py, config, kappa)?;
    let ordering = parse_ordering(ordering)?;
    let opt = OptimizerOptions { step, ri_factor: ri, base: parse_base(bits), ..Default::default() };
    let result = py
        .detach(|| allocation::optimize_ut_counts(db_to_linear(theta_db), ordering, &counts, &net, &opt))
        .map_err(err)?;
    to_py(py, &result)
}

/// Monte Carlo coverage and sum SE for NOMA and the OMA baseline.
///
/// `constellation` is "sppp" or "walker"; the Walker shell uses the
/// configured satellite count.
#[pyfunction]
#[pyo3(signature = (n=3, ordering="isinr", pa=None, theta_db=-5.0, ri=0.0, kappa=DEFAULT_KAPPA, config=None, trials=20_000, seed=DEFAULT_SEED, constellation="sppp"))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    ordering: &str,
    pa: Option<&Bound<'py, PyAny>>,
    theta_db: f64,
    ri: f64,
    kappa: u32,
    config: Option<&Bound<'py, PyDict>>,
    trials: u64,
    seed: u64,
    constellation: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let default_pa = "erpa".into_pyobject(py)?.into_any();
    let p = problem(py, n, ordering, pa.unwrap_or(&default_pa), theta_db, ri, kappa, config)?;
    let model = match constellation {
        "sppp" => ConstellationModel::Sppp,
        "walker" => ConstellationModel::WalkerDelta(WalkerDeltaParams::default_for(p.net.config.num_satellites)),
        other => return Err(PyValueError::new_err(format!("unknown constellation {other:?}"))),
    };
    let opts = McOptions { trials, seed, ..Default::default() };
    let sweep = py
        .detach(|| montecarlo::simulate_coverage_sweep(&p.setup, &[theta_db], &model, &p.net, &opts))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("noma", to_py(py, &sweep.noma[0])?)?;
    out.set_item("oma", to_py(py, &sweep.oma[0])?)?;
    out.set_item("acceptance_rate", sweep.acceptance_rate)?;
    Ok(out.into_any())
}

/// Runs the analytic-vs-simulation property checks; returns the report dict
/// with an added `passed` flag and the rendered text.
#[pyfunction]
#[pyo3(signature = (config=None, trials=20_000, seed=DEFAULT_SEED))]
fn validate<'py>(py: Python<'py>, config: Option<&Bound<'py, PyDict>>, trials: u64, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(py, config)?;
    let opts = ValidationOptions { trials, seed, ..Default::default() };
    let report = py.detach(|| experiments::run_validation(&cfg, &opts)).map_err(err)?;
    let out = to_py(py, &report)?;
    out.set_item("passed", report.passed())?;
    out.set_item("text", report.render())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "leo_noma")]
fn leo_noma_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(coverage, m)?)?;
    m.add_function(wrap_pyfunction!(sum_se, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
