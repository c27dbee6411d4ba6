//! One simulation per (γ, α) point, recorded on the configured time grid.

use crate::circuit::{
    build_trotter_circuit, folds_for_alpha, invert_layer, layer_fold_counts, loschmidt_from_circuit,
    xx_correlation, DensitySimulator, Gate,
};
use crate::ed::{central_pair, observables_dense, LindbladEvolver, PureEvolver};
use crate::error::{Error, Result};
use crate::model::{NoiseParams, Pauli, TrotterPlan};
use crate::mpdo::{return_rate, Mpdo, ProductState, ECHO_FLOOR};
use crate::tensor::TruncationPolicy;
use crate::zne::scale_noise_lindblad;

use super::config::{circuit_layers_per_step, circuit_probability, BackendConfig, ExperimentConfig};
use super::series::TimeSeries;

/// A single simulation: the noise label `gamma` scaled by `alpha`. The ideal
/// reference is `gamma = 0`, `alpha = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Job {
    pub gamma: f64,
    pub alpha: f64,
}

impl Job {
    pub fn ideal() -> Self {
        Job { gamma: 0.0, alpha: 1.0 }
    }

    pub fn is_ideal(&self) -> bool {
        self.gamma == 0.0
    }
}

/// Column name for the scale factor actually realized by circuit folding.
pub const ALPHA_COLUMN: &str = "alpha";

#[derive(Default)]
struct Recorder {
    lambda: Vec<f64>,
    echo: Vec<f64>,
    czz: Vec<f64>,
    trace_drift: Vec<f64>,
    bond_dim: Vec<f64>,
    discarded: Vec<f64>,
    alpha: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, echo: f64, n: usize, czz: f64, trace_drift: f64) -> Result<()> {
        let echo = echo.clamp(ECHO_FLOOR, 1.0);
        self.echo.push(echo);
        self.lambda.push(return_rate(echo, n)?);
        self.czz.push(czz);
        self.trace_drift.push(trace_drift);
        Ok(())
    }

    fn finish(self, t_grid: Vec<f64>) -> Result<TimeSeries> {
        let mut s = TimeSeries::new(t_grid)?
            .with("lambda", self.lambda)?
            .with("Lambda", self.echo)?
            .with("Czz", self.czz)?
            .with("trace_drift", self.trace_drift)?;
        if !self.bond_dim.is_empty() {
            s.insert("max_bond_dim", self.bond_dim)?;
            s.insert("discarded_weight", self.discarded)?;
        }
        if !self.alpha.is_empty() {
            s.insert(ALPHA_COLUMN, self.alpha)?;
        }
        Ok(s)
    }
}

/// Run one job with the configured backend. The result holds every column
/// the backend can record; selection happens when writing.
pub fn simulate_job(cfg: &ExperimentConfig, job: Job) -> Result<TimeSeries> {
    log::info!(
        "{} backend: N = {}, gamma = {}, alpha = {}",
        cfg.backend.name(),
        cfg.model.n,
        job.gamma,
        job.alpha
    );
    match &cfg.backend {
        BackendConfig::Mpdo {
            schmidt_cutoff,
            chi_max,
            canonicalize_every,
        } => run_mpdo(
            cfg,
            job,
            TruncationPolicy::new(*schmidt_cutoff, *chi_max)?,
            *canonicalize_every,
        ),
        BackendConfig::Ed => run_ed(cfg, job),
        BackendConfig::Circuit { p, idle_noise, .. } => run_circuit(cfg, job, *p, *idle_noise),
    }
}

fn steps_between_records(cfg: &ExperimentConfig) -> (usize, usize) {
    let grid = cfg.time_grid();
    let every = cfg.evolution.record_every;
    ((grid.len() - 1) * every, every)
}

fn run_mpdo(cfg: &ExperimentConfig, job: Job, policy: TruncationPolicy, canonicalize_every: usize) -> Result<TimeSeries> {
    let params = cfg.model;
    let n = params.n;
    let noise = scale_noise_lindblad(&NoiseParams::new(job.gamma)?, job.alpha)?;
    let plan = TrotterPlan::new(&params, &noise, cfg.evolution.dt, cfg.trotter_order())?;
    let psi0 = ProductState::plus(n);
    let mut rho = Mpdo::from_product_state(&psi0).with_canonicalize_every(canonicalize_every);
    let (i, j) = central_pair(n);
    let z = Pauli::Z.matrix();
    let (total, every) = steps_between_records(cfg);

    let mut rec = Recorder::default();
    let record = |rho: &Mpdo, drift: f64, rec: &mut Recorder| -> Result<()> {
        let czz = rho.local_expectation(&[(i, z.clone()), (j, z.clone())])?;
        rec.push(rho.loschmidt_echo(&psi0)?, n, czz, drift)?;
        log::debug!(
            "gamma = {}, alpha = {}: step {}, chi = {}, lambda = {:.6}",
            job.gamma,
            job.alpha,
            rho.steps_taken(),
            rho.max_bond_dim(),
            rec.lambda.last().copied().unwrap_or(f64::NAN)
        );
        rec.bond_dim.push(rho.max_bond_dim() as f64);
        rec.discarded.push(rho.cumulative_discarded_weight());
        Ok(())
    };
    record(&rho, 0.0, &mut rec)?;
    for _ in 0..total / every {
        let diag = rho.advance(&plan, every, &policy)?;
        record(&rho, (diag.trace_before_renorm - 1.0).abs(), &mut rec)?;
    }
    rec.finish(cfg.time_grid())
}

fn run_ed(cfg: &ExperimentConfig, job: Job) -> Result<TimeSeries> {
    let params = cfg.model;
    let noise = scale_noise_lindblad(&NoiseParams::new(job.gamma)?, job.alpha)?;
    let psi0 = ProductState::plus(params.n);
    let grid = cfg.time_grid();
    let mut rec = Recorder::default();
    if noise.gamma == 0.0 {
        let ev = PureEvolver::new(&params, &psi0.to_dense())?;
        for &t in &grid {
            let psi = ev.state_at(t)?;
            let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
            let obs = observables_dense(&crate::ed::DenseState::pure(psi)?, &psi0)?;
            rec.push(obs.echo, params.n, obs.czz, (norm - 1.0).abs())?;
        }
    } else {
        let rho0 = crate::ed::DenseState::pure(psi0.to_dense())?.to_density_matrix();
        let mut ev = LindbladEvolver::new(&params, &noise, &rho0, cfg.evolution.dt)?;
        let interval = cfg.native_step() * cfg.evolution.record_every as f64;
        for k in 0..grid.len() {
            if k > 0 {
                ev.advance(interval)?;
            }
            let obs = observables_dense(&ev.state()?, &psi0)?;
            rec.push(obs.echo, params.n, obs.czz, (ev.raw_trace() - 1.0).abs())?;
        }
    }
    rec.finish(grid)
}

/// Simulates the longest circuit once, layer by layer, and reads out every
/// recorded time by applying the final Hadamard layer to a copy. Layer folds
/// are drawn once for the longest circuit, so each shorter prefix carries
/// its own realized scale factor, stored in the `alpha` column.
fn run_circuit(cfg: &ExperimentConfig, job: Job, explicit_p: Option<f64>, idle_noise: bool) -> Result<TimeSeries> {
    let params = cfg.model;
    let n = params.n;
    let step = cfg.native_step();
    let p = if job.is_ideal() {
        0.0
    } else {
        match explicit_p {
            Some(p) => p,
            None => circuit_probability(job.gamma, n, step)?,
        }
    };
    let (total, every) = steps_between_records(cfg);
    let per_step = circuit_layers_per_step(n);
    let circuit = build_trotter_circuit(&params, total.max(1) as f64 * step, total.max(1))?;
    let layers = circuit.layers();
    let d = circuit.depth();
    let folds = if job.is_ideal() {
        vec![0; d]
    } else {
        layer_fold_counts(d, folds_for_alpha(d, job.alpha)?, cfg.seed)
    };
    let apply_folded = |sim: &mut DensitySimulator, idx: usize| -> Result<()> {
        sim.apply_layer(&layers[idx])?;
        let inv: Vec<Gate> = invert_layer(&layers[idx]);
        for _ in 0..folds[idx] {
            sim.apply_layer(&inv)?;
            sim.apply_layer(&layers[idx])?;
        }
        Ok(())
    };

    let (a, b) = central_pair(n);
    let mut rec = Recorder::default();
    let mut sim = DensitySimulator::new(n, p)?.with_idle_noise(idle_noise);
    apply_folded(&mut sim, 0)?;
    let mut folds_so_far = folds[0];
    for m in 0..=total {
        if m > 0 {
            for idx in 1 + (m - 1) * per_step..1 + m * per_step {
                apply_folded(&mut sim, idx)?;
                folds_so_far += folds[idx];
            }
        }
        if m % every != 0 {
            continue;
        }
        let mut out = sim.clone();
        apply_folded(&mut out, d - 1)?;
        let drift = (out.trace() - 1.0).abs();
        let state = out.state()?;
        rec.push(loschmidt_from_circuit(&state), n, xx_correlation(&state, a, b)?, drift)?;
        let depth = 2 + m * per_step;
        rec.alpha
            .push((depth + 2 * (folds_so_far + folds[d - 1])) as f64 / depth as f64);
    }
    if rec.alpha.len() != cfg.time_grid().len() {
        return Err(Error::Numerical("circuit recording fell out of step with the time grid".into()));
    }
    rec.finish(cfg.time_grid())
}
