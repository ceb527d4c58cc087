//! Python bindings: scenarios, game parameters, iteration, equilibrium and
//! standard-function checks, sweeps and rule comparisons.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use d2d_powergame::analysis;
use d2d_powergame::baselines::RuleRegistry;
use d2d_powergame::experiments::{self, GainModel, SweepAxis, SweepSpec};
use d2d_powergame::game::{self, PricingSign, ProbeGrid, UtilityKind};
use d2d_powergame::model::{self, NetworkScenario, PowerVector};
use d2d_powergame::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Diverged { .. } | Error::NonFiniteJacobian { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rule(registry: &RuleRegistry, name: &str) -> PyResult<std::sync::Arc<dyn game::UpdateRule>> {
    registry.get(name).map_err(py_err)
}

/// A set of devices with link gains toward the shared receiver.
#[pyclass(name = "Scenario", module = "powergame", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: NetworkScenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (gains, noise_power = model::DEFAULT_NOISE_POWER, p_max = model::DEFAULT_P_MAX, processing_gain = 1.0))]
    fn new(gains: Vec<f64>, noise_power: f64, p_max: f64, processing_gain: f64) -> PyResult<Self> {
        let inner = NetworkScenario::from_gains(gains, noise_power, p_max)
            .and_then(|s| s.with_processing_gain(processing_gain))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn gains(&self) -> Vec<f64> {
        self.inner.gains().to_vec()
    }

    #[getter]
    fn noise_power(&self) -> f64 {
        self.inner.noise_power()
    }

    #[getter]
    fn p_max(&self) -> f64 {
        self.inner.p_max()
    }

    #[getter]
    fn processing_gain(&self) -> f64 {
        self.inner.processing_gain()
    }

    /// Device kinds in index order, `"cellular"` or `"d2d"`.
    #[getter]
    fn kinds(&self) -> Vec<&'static str> {
        self.inner
            .devices()
            .iter()
            .map(|d| d.kind.as_str())
            .collect()
    }

    fn interference(&self, powers: Vec<f64>, i: usize) -> PyResult<f64> {
        self.inner
            .interference(&PowerVector::new(powers), i)
            .map_err(py_err)
    }

    fn sinr(&self, powers: Vec<f64>, i: usize) -> PyResult<f64> {
        self.inner
            .sinr(&PowerVector::new(powers), i)
            .map_err(py_err)
    }

    fn sinr_all(&self, powers: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .sinr_all(&PowerVector::new(powers))
            .map_err(py_err)?
            .as_slice()
            .to_vec())
    }

    /// Powers that put every device exactly at `target`, or `None` when infeasible.
    fn equal_target_powers(&self, target: f64) -> Option<Vec<f64>> {
        model::equal_target_powers(&self.inner, target).map(PowerVector::into_inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n={}, noise_power={:e}, p_max={}, processing_gain={})",
            self.inner.n(),
            self.inner.noise_power(),
            self.inner.p_max(),
            self.inner.processing_gain()
        )
    }
}

/// Seeded random placement of cellular users and D2D pairs in a disc.
#[pyclass(
    name = "ScenarioSpec",
    module = "powergame",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyScenarioSpec {
    n_devices: usize,
    n_cellular: usize,
    cell_radius_m: f64,
    path_loss_exponent: f64,
    noise_power: f64,
    p_max: f64,
    processing_gain: f64,
    seed: u64,
    /// Explicit gains; replaces the distance model when set.
    gains: Option<Vec<f64>>,
}

impl PyScenarioSpec {
    fn to_core(&self) -> experiments::ScenarioSpec {
        experiments::ScenarioSpec {
            n_devices: self.n_devices,
            n_cellular: self.n_cellular,
            cell_radius_m: self.cell_radius_m,
            path_loss_exponent: self.path_loss_exponent,
            gain_model: match &self.gains {
                Some(g) => GainModel::Explicit(g.clone()),
                None => GainModel::DistancePower,
            },
            noise_power: self.noise_power,
            p_max: self.p_max,
            processing_gain: self.processing_gain,
            seed: self.seed,
        }
    }
}

#[pymethods]
impl PyScenarioSpec {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let d = experiments::ScenarioSpec::default();
        let mut spec = Self {
            n_devices: d.n_devices,
            n_cellular: d.n_cellular,
            cell_radius_m: d.cell_radius_m,
            path_loss_exponent: d.path_loss_exponent,
            noise_power: d.noise_power,
            p_max: d.p_max,
            processing_gain: d.processing_gain,
            seed: d.seed,
            gains: None,
        };
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                let key: String = k.extract()?;
                match key.as_str() {
                    "n_devices" => spec.n_devices = v.extract()?,
                    "n_cellular" => spec.n_cellular = v.extract()?,
                    "cell_radius_m" => spec.cell_radius_m = v.extract()?,
                    "path_loss_exponent" => spec.path_loss_exponent = v.extract()?,
                    "noise_power" => spec.noise_power = v.extract()?,
                    "p_max" => spec.p_max = v.extract()?,
                    "processing_gain" => spec.processing_gain = v.extract()?,
                    "seed" => spec.seed = v.extract()?,
                    "gains" => spec.gains = v.extract()?,
                    other => {
                        return Err(PyValueError::new_err(format!(
                            "unknown ScenarioSpec field {other:?}"
                        )))
                    }
                }
            }
        }
        Ok(spec)
    }

    fn generate(&self) -> PyResult<PyScenario> {
        let inner = experiments::generate_scenario(&self.to_core()).map_err(py_err)?;
        Ok(PyScenario { inner })
    }
}

#[pyclass(
    name = "GameParams",
    module = "powergame",
    get_all,
    set_all,
    skip_from_py_object
)]
#[derive(Clone)]
struct PyGameParams {
    target: f64,
    alpha: f64,
    price: f64,
    /// `"reducing"` or `"literal"`.
    pricing_sign: String,
    tol: f64,
    max_iters: usize,
    initial_power: f64,
}

impl PyGameParams {
    fn to_core(&self) -> PyResult<game::GameParams> {
        let pricing_sign = PricingSign::parse(&self.pricing_sign).ok_or_else(|| {
            PyValueError::new_err(format!("unknown pricing sign {:?}", self.pricing_sign))
        })?;
        let params = game::GameParams {
            target: self.target,
            alpha: self.alpha,
            price: self.price,
            pricing_sign,
            tol: self.tol,
            max_iters: self.max_iters,
            initial_power: self.initial_power,
        };
        params.validate().map_err(py_err)?;
        Ok(params)
    }
}

#[pymethods]
impl PyGameParams {
    #[new]
    #[pyo3(signature = (
        target = game::DEFAULT_TARGET,
        alpha = 0.0,
        price = game::DEFAULT_PRICE,
        pricing_sign = "reducing".to_owned(),
        tol = game::DEFAULT_TOL,
        max_iters = game::DEFAULT_MAX_ITERS,
        initial_power = game::DEFAULT_INITIAL_POWER,
    ))]
    fn new(
        target: f64,
        alpha: f64,
        price: f64,
        pricing_sign: String,
        tol: f64,
        max_iters: usize,
        initial_power: f64,
    ) -> PyResult<Self> {
        let p = Self {
            target,
            alpha,
            price,
            pricing_sign,
            tol,
            max_iters,
            initial_power,
        };
        p.to_core()?;
        Ok(p)
    }

    fn effective_target(&self) -> PyResult<f64> {
        Ok(self.to_core()?.effective_target())
    }

    fn __repr__(&self) -> String {
        format!(
            "GameParams(target={}, alpha={}, price={}, pricing_sign={:?}, tol={:e}, max_iters={}, initial_power={})",
            self.target, self.alpha, self.price, self.pricing_sign, self.tol, self.max_iters, self.initial_power
        )
    }
}

fn params_or_default(params: Option<&PyGameParams>) -> PyResult<game::GameParams> {
    params.map_or_else(|| Ok(game::GameParams::default()), PyGameParams::to_core)
}

#[pyclass(name = "RunResult", module = "powergame", frozen, get_all)]
struct PyRunResult {
    rule: String,
    final_powers: Vec<f64>,
    final_sinrs: Vec<f64>,
    iterations_used: usize,
    converged: bool,
    /// Powers after each iteration k = 1, 2, ...
    trace_powers: Vec<Vec<f64>>,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn mean_power(&self) -> f64 {
        self.final_powers.iter().sum::<f64>() / self.final_powers.len() as f64
    }

    #[getter]
    fn mean_sinr(&self) -> f64 {
        self.final_sinrs.iter().sum::<f64>() / self.final_sinrs.len() as f64
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(rule={:?}, converged={}, iterations_used={}, mean_power={:e})",
            self.rule,
            self.converged,
            self.iterations_used,
            self.mean_power()
        )
    }
}

/// Names accepted wherever a rule is expected.
#[pyfunction]
fn rules() -> Vec<String> {
    RuleRegistry::with_defaults().list()
}

/// Iterates `rule` until the relative power change drops below `params.tol`.
#[pyfunction]
#[pyo3(signature = (scenario, params = None, rule = "priced", initial_powers = None))]
fn run(
    py: Python<'_>,
    scenario: &PyScenario,
    params: Option<&PyGameParams>,
    rule: &str,
    initial_powers: Option<Vec<f64>>,
) -> PyResult<PyRunResult> {
    let params = params_or_default(params)?;
    let r = self::rule(&RuleRegistry::with_defaults(), rule)?;
    let s = &scenario.inner;
    let p0 = initial_powers.map_or_else(
        || PowerVector::uniform(s.n(), params.initial_power),
        PowerVector::new,
    );
    let res = py
        .detach(|| game::run_to_convergence(s, &params, r.as_ref(), &p0))
        .map_err(py_err)?;
    Ok(PyRunResult {
        rule: res.rule,
        final_powers: res.final_powers.into_inner(),
        final_sinrs: res.final_sinrs.as_slice().to_vec(),
        iterations_used: res.iterations_used,
        converged: res.converged,
        trace_powers: res
            .trace
            .into_iter()
            .map(|t| t.powers.into_inner())
            .collect(),
    })
}

/// `(device, from_power, to_power, improvement)`.
type DeviationTuple = (usize, f64, f64, f64);

/// Probes unilateral deviations on a log grid. Returns
/// `(is_equilibrium, worst_improvement, best_deviation)` where the deviation is
/// `(device, from_power, to_power, improvement)` or `None`.
#[pyfunction]
#[pyo3(signature = (scenario, powers, params = None, priced = false))]
fn is_nash_equilibrium(
    scenario: &PyScenario,
    powers: Vec<f64>,
    params: Option<&PyGameParams>,
    priced: bool,
) -> PyResult<(bool, f64, Option<DeviationTuple>)> {
    let params = params_or_default(params)?;
    let kind = if priced {
        UtilityKind::Priced
    } else {
        UtilityKind::Base
    };
    let c = game::is_nash_equilibrium(
        &scenario.inner,
        &params,
        kind,
        &PowerVector::new(powers),
        &ProbeGrid::default(),
    )
    .map_err(py_err)?;
    let dev = c
        .best_deviation
        .map(|d| (d.device, d.from_power, d.to_power, d.improvement));
    Ok((c.is_equilibrium, c.worst_improvement, dev))
}

/// Positivity, monotonicity and scalability of `rule` on random power vectors.
#[pyfunction]
#[pyo3(signature = (scenario, params = None, rule = "unpriced", samples = 1000, seed = 1))]
fn check_standard_function<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    params: Option<&PyGameParams>,
    rule: &str,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = params_or_default(params)?;
    let r = self::rule(&RuleRegistry::with_defaults(), rule)?;
    let report = py
        .detach(|| {
            analysis::check_standard_function(&scenario.inner, &params, r.as_ref(), samples, seed)
        })
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("samples", report.samples)?;
    d.set_item("positivity_ok", report.positivity_ok)?;
    d.set_item("monotonicity_ok", report.monotonicity_ok)?;
    d.set_item("scalability_ok", report.scalability_ok)?;
    d.set_item("clamp_activations", report.clamp_activations)?;
    d.set_item("all_ok", report.all_ok())?;
    match &report.counterexample {
        Some(c) => {
            let cx = PyDict::new(py);
            cx.set_item("condition", c.condition.as_str())?;
            cx.set_item("device", c.device)?;
            cx.set_item("lambda", c.lambda)?;
            cx.set_item("powers", c.powers.clone())?;
            d.set_item("counterexample", cx)?;
        }
        None => d.set_item("counterexample", py.None())?,
    }
    Ok(d)
}

/// Finite-difference Jacobian of `F(p) = -p + f(p)`. Returns
/// `(rows, determinant, scaled_determinant, nonsingular)`.
#[pyfunction]
#[pyo3(signature = (scenario, powers, params = None, rule = "unpriced", h_step = 1e-4))]
fn jacobian(
    scenario: &PyScenario,
    powers: Vec<f64>,
    params: Option<&PyGameParams>,
    rule: &str,
    h_step: f64,
) -> PyResult<(Vec<Vec<f64>>, f64, f64, bool)> {
    let params = params_or_default(params)?;
    let r = self::rule(&RuleRegistry::with_defaults(), rule)?;
    let j = analysis::jacobian_at(
        &scenario.inner,
        &params,
        r.as_ref(),
        &PowerVector::new(powers),
        h_step,
    )
    .map_err(py_err)?;
    let rows = j
        .matrix
        .row_iter()
        .map(|row| row.iter().copied().collect())
        .collect();
    Ok((rows, j.determinant, j.scaled_determinant, j.nonsingular))
}

/// Seeded sweep over `alpha`, `price` or `device_count`; one dict per run.
#[pyfunction]
#[pyo3(signature = (axis, values, spec = None, params = None, rule = "priced", repetitions = experiments::DEFAULT_REPETITIONS))]
fn sweep<'py>(
    py: Python<'py>,
    axis: &str,
    values: Vec<f64>,
    spec: Option<&PyScenarioSpec>,
    params: Option<&PyGameParams>,
    rule: &str,
    repetitions: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let axis = SweepAxis::parse(axis)
        .ok_or_else(|| PyValueError::new_err(format!("unknown sweep axis {axis:?}")))?;
    let sweep = SweepSpec {
        axis,
        values,
        rule: rule.to_owned(),
        repetitions,
        params: params_or_default(params)?,
    };
    let scenario_spec =
        spec.map_or_else(experiments::ScenarioSpec::default, PyScenarioSpec::to_core);
    let rows = py
        .detach(|| experiments::run_sweep(&sweep, &scenario_spec, &RuleRegistry::with_defaults()))
        .map_err(py_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("axis", axis.as_str())?;
            d.set_item("axis_value", r.axis_value)?;
            d.set_item("repetition", r.repetition)?;
            d.set_item("seed", r.seed)?;
            d.set_item("mean_power_w", r.mean_power_w)?;
            d.set_item("mean_sinr", r.mean_sinr)?;
            d.set_item("iterations", r.iterations)?;
            d.set_item("converged", r.converged)?;
            d.set_item("admitted", r.admitted)?;
            d.set_item("energy_efficiency", r.energy_efficiency)?;
            Ok(d)
        })
        .collect()
}

/// Runs each rule on the same seeded scenarios; one dict per rule.
#[pyfunction]
#[pyo3(signature = (rules, spec = None, params = None, repetitions = experiments::DEFAULT_REPETITIONS))]
fn compare<'py>(
    py: Python<'py>,
    rules: Vec<String>,
    spec: Option<&PyScenarioSpec>,
    params: Option<&PyGameParams>,
    repetitions: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let params = params_or_default(params)?;
    let scenario_spec =
        spec.map_or_else(experiments::ScenarioSpec::default, PyScenarioSpec::to_core);
    let rows = py
        .detach(|| {
            experiments::compare_rules(
                &rules,
                &scenario_spec,
                &params,
                repetitions,
                &RuleRegistry::with_defaults(),
            )
        })
        .map_err(py_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("rule", r.rule)?;
            d.set_item("mean_power_w", r.mean_power_w)?;
            d.set_item("iterations", r.iterations)?;
            d.set_item("mean_sinr", r.mean_sinr)?;
            d.set_item("converged_runs", r.converged_runs)?;
            d.set_item("repetitions", r.repetitions)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn powergame(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyScenarioSpec>()?;
    m.add_class::<PyGameParams>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(rules, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(is_nash_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(check_standard_function, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add("MIN_POWER", model::MIN_POWER)?;
    Ok(())
}
