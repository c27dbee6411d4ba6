//! Python bindings: chain parameters, the MPDO state, Richardson weights,
//! Trotter circuits and whole sweeps.

use pyo3::exceptions::{PyIndexError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dqpt::circuit::{self, DensitySimulator};
use dqpt::ed::{central_pair, PureEvolver};
use dqpt::experiment::{self as exp, ExperimentConfig, Preset, TimeSeries};
use dqpt::model::{self, NoiseParams, Pauli, TrotterOrder, TrotterPlan};
use dqpt::mpdo::{self, ProductState};
use dqpt::tensor::TruncationPolicy;
use dqpt::zne;

fn err(e: dqpt::Error) -> PyErr {
    match e {
        dqpt::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        dqpt::Error::OutOfRange(_) => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn series_dict<'py>(py: Python<'py>, s: &TimeSeries) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", s.t_grid().to_vec())?;
    for (name, values) in s.columns() {
        d.set_item(name, values.clone())?;
    }
    Ok(d)
}

fn json_value<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Open Ising chain with couplings in units of J.
#[pyclass(name = "ChainParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChainParams(model::HamiltonianParams);

#[pymethods]
impl PyChainParams {
    #[new]
    #[pyo3(signature = (n, jz = 1.0, jx = 0.1, hx = 0.1))]
    fn new(n: usize, jz: f64, jx: f64, hx: f64) -> PyResult<Self> {
        model::HamiltonianParams::new(n, jz, jx, hx).map(Self).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn jz(&self) -> f64 {
        self.0.jz
    }

    #[getter]
    fn jx(&self) -> f64 {
        self.0.jx
    }

    #[getter]
    fn hx(&self) -> f64 {
        self.0.hx
    }

    fn __repr__(&self) -> String {
        format!("ChainParams(n={}, jz={}, jx={}, hx={})", self.0.n, self.0.jz, self.0.jx, self.0.hx)
    }
}

/// Density operator of the chain as an MPDO, started from |+...+>.
#[pyclass(name = "Mpdo")]
struct PyMpdo {
    rho: mpdo::Mpdo,
    psi0: ProductState,
    params: model::HamiltonianParams,
    plan: TrotterPlan,
    policy: TruncationPolicy,
    steps: u64,
}

#[pymethods]
impl PyMpdo {
    #[new]
    #[pyo3(signature = (params, gamma = 0.0, dt = 0.01, schmidt_cutoff = 1e-5, chi_max = 200, order = 2))]
    fn new(params: &PyChainParams, gamma: f64, dt: f64, schmidt_cutoff: f64, chi_max: usize, order: u8) -> PyResult<Self> {
        let noise = NoiseParams::new(gamma).map_err(err)?;
        let order = TrotterOrder::from_int(order).map_err(err)?;
        let plan = TrotterPlan::new(&params.0, &noise, dt, order).map_err(err)?;
        let policy = TruncationPolicy::new(schmidt_cutoff, chi_max).map_err(err)?;
        let psi0 = ProductState::plus(params.0.n);
        Ok(PyMpdo {
            rho: mpdo::Mpdo::from_product_state(&psi0),
            psi0,
            params: params.0,
            plan,
            policy,
            steps: 0,
        })
    }

    /// Advance by `steps` time steps; returns the discarded weight.
    fn advance(&mut self, py: Python<'_>, steps: usize) -> PyResult<f64> {
        let d = py
            .detach(|| self.rho.advance(&self.plan, steps, &self.policy))
            .map_err(err)?;
        self.steps += steps as u64;
        Ok(d.step_discarded_weight)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.steps as f64 * self.plan.dt
    }

    fn trace(&self) -> f64 {
        self.rho.trace()
    }

    fn bond_dims(&self) -> Vec<usize> {
        self.rho.bond_dims()
    }

    fn loschmidt_echo(&self) -> PyResult<f64> {
        self.rho.loschmidt_echo(&self.psi0).map_err(err)
    }

    fn return_rate(&self) -> PyResult<f64> {
        mpdo::return_rate(self.loschmidt_echo()?, self.params.n).map_err(err)
    }

    /// <Z_i Z_j>; defaults to the central pair.
    #[pyo3(signature = (i = None, j = None))]
    fn czz(&self, i: Option<usize>, j: Option<usize>) -> PyResult<f64> {
        let (ci, cj) = central_pair(self.params.n);
        let z = Pauli::Z.matrix();
        self.rho
            .local_expectation(&[(i.unwrap_or(ci), z.clone()), (j.unwrap_or(cj), z)])
            .map_err(err)
    }
}

/// Exact noiseless echo |<psi0|psi(t)>|^2 from |+...+> at each time.
#[pyfunction]
fn exact_echo(params: &PyChainParams, times: Vec<f64>) -> PyResult<Vec<f64>> {
    let ev = PureEvolver::new(&params.0, &ProductState::plus(params.0.n).to_dense()).map_err(err)?;
    Ok(times.iter().map(|t| ev.echo_at(*t)).collect())
}

#[pyfunction]
fn return_rate(echo: f64, n: usize) -> PyResult<f64> {
    mpdo::return_rate(echo, n).map_err(err)
}

#[pyfunction]
fn richardson_coefficients(alphas: Vec<f64>) -> PyResult<Vec<f64>> {
    zne::richardson_coefficients(&alphas).map_err(err)
}

#[pyfunction]
fn extrapolate(alphas: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    let s = zne::ZneSchedule::new(alphas).map_err(err)?;
    zne::extrapolate(&s, &values).map_err(err)
}

/// Trotter circuit for time `t` in `steps` steps.
#[pyclass(name = "Circuit", frozen)]
struct PyCircuit(circuit::Circuit);

#[pymethods]
impl PyCircuit {
    #[new]
    fn new(params: &PyChainParams, t: f64, steps: usize) -> PyResult<Self> {
        circuit::build_trotter_circuit(&params.0, t, steps).map(Self).map_err(err)
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.0.n_qubits()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn gate_count(&self) -> usize {
        self.0.gate_count()
    }

    fn netlist(&self) -> String {
        self.0.to_netlist()
    }

    /// Fold `k` randomly chosen layers; returns the folded circuit and its
    /// realized scale factor.
    fn fold_layers(&self, k: usize, seed: u64) -> (PyCircuit, f64) {
        let (c, alpha) = circuit::fold_layers(&self.0, k, seed);
        (PyCircuit(c), alpha)
    }

    fn fold_global(&self, n: usize) -> PyCircuit {
        PyCircuit(circuit::fold_global(&self.0, n))
    }

    /// Density-matrix simulation with a depolarizing channel of strength `p`
    /// after each gate. Returns (P(0...0), <X_i X_j> on the central pair).
    #[pyo3(signature = (p = 0.0, idle_noise = false))]
    fn simulate(&self, py: Python<'_>, p: f64, idle_noise: bool) -> PyResult<(f64, f64)> {
        py.detach(|| {
            let mut sim = DensitySimulator::new(self.0.n_qubits(), p)?.with_idle_noise(idle_noise);
            sim.apply_circuit(&self.0)?;
            let state = sim.state()?;
            let (i, j) = central_pair(self.0.n_qubits());
            Ok((circuit::loschmidt_from_circuit(&state), circuit::xx_correlation(&state, i, j)?))
        })
        .map_err(err)
    }
}

#[pyfunction]
fn folds_for_alpha(depth: usize, alpha: f64) -> PyResult<usize> {
    circuit::folds_for_alpha(depth, alpha).map_err(err)
}

/// Configuration as TOML text for a named preset.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    let preset = <Preset as clap::ValueEnum>::from_str(name, true).map_err(PyValueError::new_err)?;
    ExperimentConfig::preset(preset).to_toml_string().map_err(err)
}

/// Run the sweep described by a TOML config without writing files.
///
/// Returns a dict with `ideal`, `raw` (keyed by `(gamma, alpha)`),
/// `mitigated` (keyed by `gamma`), each a dict of columns, and `t_star`
/// (the threshold curve of C_zz as `(gamma, t*)` pairs).
#[pyfunction]
#[pyo3(signature = (config_toml, workers = None))]
fn run_sweep<'py>(py: Python<'py>, config_toml: &str, workers: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    let r = py.detach(|| exp::compute_sweep(&cfg, workers)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("ideal", series_dict(py, &r.ideal)?)?;
    let raw = PyDict::new(py);
    for (g, a, s) in &r.raw {
        raw.set_item((*g, *a), series_dict(py, s)?)?;
    }
    out.set_item("raw", raw)?;
    let mitigated = PyDict::new(py);
    for (g, s) in &r.mitigated {
        mitigated.set_item(*g, series_dict(py, s)?)?;
    }
    out.set_item("mitigated", mitigated)?;
    if r.mitigated.iter().any(|(g, _)| *g > 0.0) && r.ideal.column("Czz").is_ok() {
        let surface = r.surface("Czz", exp::DEFAULT_THRESHOLD).map_err(err)?;
        out.set_item("t_star", surface.threshold_curve)?;
    }
    Ok(out)
}

/// Peak-splitting report of noisy λ(t) around the ideal peaks, as a dict.
#[pyfunction]
fn dqpt_report<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    ideal: Vec<f64>,
    noisy: Vec<(f64, Vec<f64>)>,
) -> PyResult<Bound<'py, PyAny>> {
    let series = |v: Vec<f64>| TimeSeries::new(t.clone()).and_then(|s| s.with("lambda", v));
    let ideal = series(ideal).map_err(err)?;
    let noisy: Vec<(f64, TimeSeries)> = noisy
        .into_iter()
        .map(|(g, v)| series(v).map(|s| (g, s)))
        .collect::<dqpt::Result<_>>()
        .map_err(err)?;
    let refs: Vec<(f64, &TimeSeries)> = noisy.iter().map(|(g, s)| (*g, s)).collect();
    let report = exp::dqpt_window_report(&ideal, &refs, exp::DqptOptions::default()).map_err(err)?;
    let text = serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_value(py, &text)
}

#[pymodule]
fn dqpt_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChainParams>()?;
    m.add_class::<PyMpdo>()?;
    m.add_class::<PyCircuit>()?;
    m.add_function(wrap_pyfunction!(exact_echo, m)?)?;
    m.add_function(wrap_pyfunction!(return_rate, m)?)?;
    m.add_function(wrap_pyfunction!(richardson_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(folds_for_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(dqpt_report, m)?)?;
    Ok(())
}
