use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::backend::{simulate_job, Job, ALPHA_COLUMN};
use super::config::{ExperimentConfig, ExtrapolationTarget, Observable};
use super::series::TimeSeries;
use super::surface::{error_surface, ErrorSurface, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::mpdo::{return_rate, ECHO_FLOOR};
use crate::zne::{extrapolate_series, richardson_coefficients, ZneSchedule};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// In-memory sweep results, ordered as the config lists `γ` and `α`.
#[derive(Clone, Debug)]
pub struct SweepResults {
    pub ideal: TimeSeries,
    /// `(γ, α, series)` for every `γ > 0`.
    pub raw: Vec<(f64, f64, TimeSeries)>,
    /// `(γ, series)` for every configured `γ`.
    pub mitigated: Vec<(f64, TimeSeries)>,
}

impl SweepResults {
    pub fn raw_series(&self, gamma: f64, alpha: f64) -> Option<&TimeSeries> {
        self.raw
            .iter()
            .find(|(g, a, _)| *g == gamma && *a == alpha)
            .map(|(_, _, s)| s)
    }

    pub fn mitigated_series(&self, gamma: f64) -> Option<&TimeSeries> {
        self.mitigated.iter().find(|(g, _)| *g == gamma).map(|(_, s)| s)
    }

    /// ε surface of the mitigated `observable` over all `γ > 0`.
    pub fn surface(&self, observable: &str, threshold: f64) -> Result<ErrorSurface> {
        let noisy: Vec<(f64, &TimeSeries)> = self
            .mitigated
            .iter()
            .filter(|(g, _)| *g > 0.0)
            .map(|(g, s)| (*g, s))
            .collect();
        error_surface(&self.ideal, &noisy, observable, threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub library_version: String,
    pub backend: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub extrapolation_target: ExtrapolationTarget,
    /// Circuit runs extrapolate with the scale factors realized at each time.
    pub per_point_alphas: bool,
    pub epsilon_threshold: f64,
    pub epsilon_normalization: String,
    pub wall_time_seconds: f64,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_reader(std::io::BufReader::new(file))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Serde(format!("unsupported manifest schema version {}", m.schema_version)));
        }
        Ok(m)
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    let mut jobs = vec![Job::ideal()];
    for &gamma in cfg.noise.gammas.iter().filter(|&&g| g > 0.0) {
        for &alpha in &cfg.zne.alphas {
            jobs.push(Job { gamma, alpha });
        }
    }
    jobs
}

/// Run every (γ, α) point on a pool of `workers` threads (all cores when
/// `None`) and extrapolate. Results do not depend on the worker count.
pub fn compute_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<SweepResults> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let jobs = jobs(cfg);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut series = pool
        .install(|| jobs.par_iter().map(|&j| simulate_job(cfg, j)).collect::<Result<Vec<_>>>())?
        .into_iter();
    let ideal = series.next().expect("ideal job always present");
    let raw: Vec<(f64, f64, TimeSeries)> = jobs[1..].iter().zip(series).map(|(j, s)| (j.gamma, j.alpha, s)).collect();

    let mut mitigated = Vec::new();
    for &gamma in &cfg.noise.gammas {
        if gamma == 0.0 {
            mitigated.push((0.0, ideal.clone()));
            continue;
        }
        let runs: Vec<&TimeSeries> = raw.iter().filter(|(g, _, _)| *g == gamma).map(|(_, _, s)| s).collect();
        mitigated.push((gamma, mitigate(&schedule, cfg.zne.target, &runs, cfg.model.n)?));
    }
    Ok(SweepResults { ideal, raw, mitigated })
}

/// Zero-noise estimate from one series per scale factor. Series carrying an
/// `alpha` column are extrapolated pointwise with their realized factors.
pub fn mitigate(schedule: &ZneSchedule, target: ExtrapolationTarget, runs: &[&TimeSeries], n: usize) -> Result<TimeSeries> {
    if runs.len() != schedule.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.len(),
            got: runs.len(),
        });
    }
    let grid = runs[0].t_grid().to_vec();
    let per_point = runs[0].column(ALPHA_COLUMN).is_ok();
    let extrapolate_column = |name: &str| -> Result<Vec<f64>> {
        if per_point {
            let alphas: Vec<&[f64]> = runs.iter().map(|s| s.column(ALPHA_COLUMN)).collect::<Result<_>>()?;
            let values: Vec<&[f64]> = runs.iter().map(|s| s.column(name)).collect::<Result<_>>()?;
            if runs.iter().any(|s| s.t_grid() != grid.as_slice()) {
                return Err(Error::GridMismatch("runs do not share a time grid".into()));
            }
            (0..grid.len())
                .map(|i| {
                    let a: Vec<f64> = alphas.iter().map(|c| c[i]).collect();
                    let v: Vec<f64> = values.iter().map(|c| c[i]).collect();
                    richardson_point(&a, &v)
                })
                .collect()
        } else {
            let cols: Vec<(&[f64], &[f64])> = runs
                .iter()
                .map(|s| Ok((s.t_grid(), s.column(name)?)))
                .collect::<Result<_>>()?;
            extrapolate_series(schedule, &cols)
        }
    };
    let (lambda, echo) = match target {
        ExtrapolationTarget::ReturnRate => {
            let lambda = extrapolate_column("lambda")?;
            let echo = lambda.iter().map(|l| (-(n as f64) * l).exp()).collect();
            (lambda, echo)
        }
        ExtrapolationTarget::Echo => {
            let echo = extrapolate_column("Lambda")?;
            let lambda = echo
                .iter()
                .map(|&e| return_rate(e.clamp(ECHO_FLOOR, 1.0), n))
                .collect::<Result<_>>()?;
            (lambda, echo)
        }
    };
    let czz = extrapolate_column("Czz")?;
    TimeSeries::new(grid.clone())?
        .with("lambda", lambda)?
        .with("Lambda", echo)?
        .with("Czz", czz)
}

fn richardson_point(alphas: &[f64], values: &[f64]) -> Result<f64> {
    // folding of short prefixes can realize the same factor twice
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(alphas.len());
    for (&a, &v) in alphas.iter().zip(values) {
        if !nodes.iter().any(|(x, _)| *x == a) {
            nodes.push((a, v));
        }
    }
    let a: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let betas = richardson_coefficients(&a)?;
    Ok(betas.iter().zip(&nodes).map(|(b, (_, v))| b * v).sum())
}

fn tag(x: f64) -> String {
    format!("{x}")
}

fn selected_columns(cfg: &ExperimentConfig, series: &TimeSeries) -> Vec<&'static str> {
    let mut names: Vec<&'static str> = cfg
        .evolution
        .observables
        .iter()
        .map(|o| o.column())
        .filter(|c| series.column(c).is_ok())
        .collect();
    if series.column(ALPHA_COLUMN).is_ok() {
        names.push(ALPHA_COLUMN);
    }
    names
}

/// Write every series plus the ε surface (when `Czz` is recorded) and the
/// manifest into `out`.
pub fn write_sweep(cfg: &ExperimentConfig, results: &SweepResults, out: &Path, wall_time: f64) -> Result<Manifest> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let schedule = cfg.schedule()?;
    let mut files = Vec::new();
    let mut write = |name: String, kind: &str, gamma: Option<f64>, alpha: Option<f64>, s: &TimeSeries| -> Result<()> {
        s.select(&selected_columns(cfg, s))?.write_csv(&out.join(&name))?;
        files.push(ManifestFile {
            path: name,
            kind: kind.into(),
            gamma,
            alpha,
        });
        Ok(())
    };
    write("ideal.csv".into(), "ideal", Some(0.0), None, &results.ideal)?;
    for (g, a, s) in &results.raw {
        write(format!("raw_g{}_a{}.csv", tag(*g), tag(*a)), "raw", Some(*g), Some(*a), s)?;
    }
    for (g, s) in &results.mitigated {
        write(format!("mitigated_g{}.csv", tag(*g)), "mitigated", Some(*g), None, s)?;
    }

    let wants_czz = cfg.evolution.observables.contains(&Observable::Czz);
    if wants_czz && results.mitigated.iter().any(|(g, _)| *g > 0.0) {
        match results.surface("Czz", DEFAULT_THRESHOLD) {
            Ok(surface) => {
                surface.write_csv(&out.join("surface_Czz.csv"))?;
                surface.write_threshold_csv(&out.join("threshold_Czz.csv"))?;
                for (name, kind) in [("surface_Czz.csv", "surface"), ("threshold_Czz.csv", "threshold")] {
                    files.push(ManifestFile {
                        path: name.into(),
                        kind: kind.into(),
                        gamma: None,
                        alpha: None,
                    });
                }
            }
            Err(e) => log::warn!("skipping error surface: {e}"),
        }
    }

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        library_version: env!("CARGO_PKG_VERSION").into(),
        backend: cfg.backend.name().into(),
        config_sha256: config_hash(cfg)?,
        config: cfg.clone(),
        alphas: schedule.alphas().to_vec(),
        betas: schedule.betas().to_vec(),
        extrapolation_target: cfg.zne.target,
        per_point_alphas: results.ideal.column(ALPHA_COLUMN).is_ok(),
        epsilon_threshold: DEFAULT_THRESHOLD,
        epsilon_normalization: "max - min of the ideal series over the full recorded window".into(),
        wall_time_seconds: wall_time,
        files,
    };
    let path = out.join(MANIFEST_FILE);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &manifest)?;
    Ok(manifest)
}

/// Compute and write a sweep into `cfg.output_dir`.
pub fn run_sweep(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<(SweepResults, Manifest)> {
    let start = Instant::now();
    let results = compute_sweep(cfg, workers)?;
    let out: PathBuf = cfg.output_dir.clone();
    let manifest = write_sweep(cfg, &results, &out, start.elapsed().as_secs_f64())?;
    Ok((results, manifest))
}

/// Check that the manifest's β match a fresh computation from its α.
pub fn verify_manifest_betas(m: &Manifest) -> Result<bool> {
    let fresh = richardson_coefficients(&m.alphas)?;
    Ok(fresh.len() == m.betas.len() && fresh.iter().zip(&m.betas).all(|(a, b)| a == b))
}

