//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "out/bench-n8"
//!
//! [model]
//! n = 8
//! jz = 1.0
//! jx = 0.1
//! hx = 0.1
//!
//! [noise]
//! gammas = [0.005, 0.01, 0.02]
//!
//! [zne]
//! alphas = [1.0, 1.5, 2.0]
//! target = "lambda"            # or "Lambda"
//!
//! [evolution]
//! dt = 0.01
//! t_max = 14.0
//! observables = ["lambda", "Lambda", "Czz"]
//! record_every = 1             # optional
//! trotter_order = 2            # optional, MPDO only
//!
//! [backend]
//! kind = "mpdo"                # "mpdo" | "ed" | "circuit"
//! schmidt_cutoff = 1e-5
//! chi_max = 200
//! canonicalize_every = 50      # optional
//! ```
//!
//! The circuit backend takes `steps_per_unit_time` and an optional `p`. Its
//! time grid is the Trotter grid `m / steps_per_unit_time`, and `evolution.dt`
//! is ignored. Without `p`, every `γ` is converted to a per-gate probability
//! with [`circuit_probability`]. With `p`, the `γ` list must hold exactly one
//! value, which only labels the output.
//!
//! Unknown keys are rejected everywhere.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lindblad_to_depolarizing_p, HamiltonianParams, NoiseParams, TrotterOrder};
use crate::tensor::TruncationPolicy;
use crate::zne::ZneSchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: HamiltonianParams,
    pub noise: NoiseGrid,
    #[serde(default)]
    pub zne: ZneConfig,
    pub evolution: EvolutionConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseGrid {
    pub gammas: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtrapolationTarget {
    /// Extrapolate λ(t) and derive Λ = e^{−Nλ}.
    #[default]
    #[serde(rename = "lambda")]
    ReturnRate,
    /// Extrapolate Λ(t) and derive λ.
    #[serde(rename = "Lambda")]
    Echo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZneConfig {
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub target: ExtrapolationTarget,
}

impl Default for ZneConfig {
    fn default() -> Self {
        ZneConfig {
            alphas: vec![1.0, 1.5, 2.0],
            target: ExtrapolationTarget::ReturnRate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Observable {
    #[serde(rename = "lambda")]
    ReturnRate,
    #[serde(rename = "Lambda")]
    Echo,
    #[serde(rename = "Czz")]
    Czz,
    #[serde(rename = "trace_drift")]
    TraceDrift,
    #[serde(rename = "max_bond_dim")]
    MaxBondDim,
    #[serde(rename = "discarded_weight")]
    DiscardedWeight,
}

impl Observable {
    pub const ALL: [Observable; 6] = [
        Observable::ReturnRate,
        Observable::Echo,
        Observable::Czz,
        Observable::TraceDrift,
        Observable::MaxBondDim,
        Observable::DiscardedWeight,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Observable::ReturnRate => "lambda",
            Observable::Echo => "Lambda",
            Observable::Czz => "Czz",
            Observable::TraceDrift => "trace_drift",
            Observable::MaxBondDim => "max_bond_dim",
            Observable::DiscardedWeight => "discarded_weight",
        }
    }

    fn mpdo_only(self) -> bool {
        matches!(self, Observable::MaxBondDim | Observable::DiscardedWeight)
    }

    /// Observables that are extrapolated into the mitigated series.
    pub fn mitigable(self) -> bool {
        matches!(self, Observable::ReturnRate | Observable::Echo | Observable::Czz)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.column() == s)
            .ok_or_else(|| Error::Config(format!("unknown observable {s:?}")))
    }
}

fn default_observables() -> Vec<Observable> {
    vec![Observable::ReturnRate, Observable::Echo, Observable::Czz]
}

fn one() -> usize {
    1
}

fn two() -> u8 {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default = "one")]
    pub record_every: usize,
    #[serde(default = "two")]
    pub trotter_order: u8,
}

fn default_canonicalize_every() -> usize {
    crate::mpdo::DEFAULT_CANONICALIZE_EVERY
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Mpdo {
        schmidt_cutoff: f64,
        chi_max: usize,
        #[serde(default = "default_canonicalize_every")]
        canonicalize_every: usize,
    },
    Ed,
    Circuit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        steps_per_unit_time: f64,
        /// Depolarize qubits that a layer leaves idle as well.
        #[serde(default)]
        idle_noise: bool,
    },
}

impl BackendConfig {
    pub fn name(&self) -> &'static str {
        match self {
            BackendConfig::Mpdo { .. } => "mpdo",
            BackendConfig::Ed => "ed",
            BackendConfig::Circuit { .. } => "circuit",
        }
    }
}

/// Named configurations selectable with `--preset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// N = 32 MPDO run to t = 14/J (hours).
    #[value(name = "paper-n32")]
    ChainN32,
    /// N = 8 MPDO sweep over the error-surface γ grid.
    #[value(name = "bench-n8")]
    BenchN8,
    /// N = 6 depolarizing circuit at p = 0.001.
    #[value(name = "circuit-n6")]
    CircuitN6,
}

/// γ grid of the error-surface sweep.
pub const SURFACE_GAMMAS: [f64; 7] = [0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1];

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let mpdo = BackendConfig::Mpdo {
            schmidt_cutoff: 1e-5,
            chi_max: 200,
            canonicalize_every: default_canonicalize_every(),
        };
        // MPDO presets record every 0.05/J so that consecutive steps can
        // share their half steps
        let evolution = |t_max, record_every| EvolutionConfig {
            dt: 0.01,
            t_max,
            observables: default_observables(),
            record_every,
            trotter_order: 2,
        };
        match preset {
            Preset::ChainN32 => ExperimentConfig {
                model: HamiltonianParams::standard_chain(32),
                noise: NoiseGrid {
                    gammas: vec![0.005, 0.01, 0.02],
                },
                zne: ZneConfig::default(),
                evolution: evolution(14.0, 5),
                backend: mpdo,
                seed: 0,
                output_dir: "out/paper-n32".into(),
            },
            Preset::BenchN8 => ExperimentConfig {
                model: HamiltonianParams::standard_chain(8),
                noise: NoiseGrid {
                    gammas: SURFACE_GAMMAS.to_vec(),
                },
                zne: ZneConfig::default(),
                evolution: evolution(14.0, 5),
                backend: mpdo,
                seed: 0,
                output_dir: "out/bench-n8".into(),
            },
            Preset::CircuitN6 => ExperimentConfig {
                model: HamiltonianParams::standard_chain(6),
                noise: NoiseGrid { gammas: vec![0.025] },
                zne: ZneConfig::default(),
                evolution: evolution(6.0, 1),
                backend: BackendConfig::Circuit {
                    p: Some(0.001),
                    steps_per_unit_time: 20.0,
                    idle_noise: false,
                },
                seed: 0,
                output_dir: "out/circuit-n6".into(),
            },
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let ev = &self.evolution;
        if !(ev.dt > 0.0 && ev.dt.is_finite()) {
            return Err(Error::Config(format!("evolution.dt must be > 0, got {}", ev.dt)));
        }
        if !(ev.t_max >= ev.dt && ev.t_max.is_finite()) {
            return Err(Error::Config(format!("evolution.t_max must be >= dt, got {}", ev.t_max)));
        }
        if ev.record_every == 0 {
            return Err(Error::Config("evolution.record_every must be >= 1".into()));
        }
        if ev.observables.is_empty() {
            return Err(Error::Config("evolution.observables is empty".into()));
        }
        TrotterOrder::from_int(ev.trotter_order)?;
        if self.noise.gammas.is_empty() {
            return Err(Error::Config("noise.gammas is empty".into()));
        }
        for &g in &self.noise.gammas {
            NoiseParams::new(g)?;
        }
        ZneSchedule::new(self.zne.alphas.clone())?;
        match &self.backend {
            BackendConfig::Mpdo {
                schmidt_cutoff, chi_max, ..
            } => {
                TruncationPolicy::new(*schmidt_cutoff, *chi_max)?;
            }
            BackendConfig::Ed | BackendConfig::Circuit { .. } => {
                if let Some(o) = ev.observables.iter().find(|o| o.mpdo_only()) {
                    return Err(Error::Config(format!(
                        "observable {o} is only recorded by the mpdo backend"
                    )));
                }
            }
        }
        if let BackendConfig::Circuit { p, steps_per_unit_time, .. } = &self.backend {
            if !(*steps_per_unit_time > 0.0 && steps_per_unit_time.is_finite()) {
                return Err(Error::Config(format!(
                    "backend.steps_per_unit_time must be > 0, got {steps_per_unit_time}"
                )));
            }
            if let Some(p) = p {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("backend.p must be in [0, 1], got {p}")));
                }
                if self.noise.gammas.len() != 1 {
                    return Err(Error::Config(
                        "with an explicit backend.p, noise.gammas must hold exactly one label value".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<ZneSchedule> {
        ZneSchedule::new(self.zne.alphas.clone())
    }

    pub fn trotter_order(&self) -> TrotterOrder {
        TrotterOrder::from_int(self.evolution.trotter_order).unwrap_or(TrotterOrder::Second)
    }

    /// Recording grid `t_k = k · record_every · step` for `k = 0..=K`, with
    /// the backend's native step.
    pub fn time_grid(&self) -> Vec<f64> {
        let step = self.native_step() * self.evolution.record_every as f64;
        let k_max = (self.evolution.t_max / step + 1e-9).floor() as usize;
        (0..=k_max).map(|k| k as f64 * step).collect()
    }

    /// Time advanced by one backend step.
    pub fn native_step(&self) -> f64 {
        match &self.backend {
            BackendConfig::Circuit {
                steps_per_unit_time, ..
            } => 1.0 / steps_per_unit_time,
            _ => self.evolution.dt,
        }
    }
}

/// Layers per Trotter step in the circuit: two RZZ and two RXX parities plus
/// the RX layer (fewer when N = 2).
pub fn circuit_layers_per_step(n: usize) -> usize {
    if n == 2 {
        3
    } else {
        5
    }
}

/// Per-gate depolarizing probability such that an interior qubit, which sees
/// one channel per layer, accumulates the same contraction `e^{−4γ δt}` per
/// Trotter step as continuous depolarizing at rate `γ`.
pub fn circuit_probability(gamma: f64, n: usize, step: f64) -> Result<f64> {
    let layers = circuit_layers_per_step(n) as f64;
    lindblad_to_depolarizing_p(gamma, step / layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
output_dir = "out/x"

[model]
n = 4
jz = 1.0
jx = 0.1
hx = 0.1

[noise]
gammas = [0.0, 0.02]

[evolution]
dt = 0.05
t_max = 1.0

[backend]
kind = "mpdo"
schmidt_cutoff = 1e-5
chi_max = 64
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.zne.alphas, vec![1.0, 1.5, 2.0]);
        assert_eq!(cfg.evolution.record_every, 1);
        assert_eq!(cfg.trotter_order(), TrotterOrder::Second);
        let grid = cfg.time_grid();
        assert_eq!(grid.len(), 21);
        assert_eq!(*grid.last().unwrap(), 1.0);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = EXAMPLE.replace("seed = 7", "seed = 7\nfoo = 1");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = EXAMPLE.replace("chi_max = 64", "chi_max = 64\nbogus = true");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
        let bad = EXAMPLE.replace("hx = 0.1", "hx = 0.1\nhz = 0.0");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn rejects_invalid_values() {
        for (from, to) in [
            ("dt = 0.05", "dt = 0.0"),
            ("t_max = 1.0", "t_max = 0.01"),
            ("gammas = [0.0, 0.02]", "gammas = []"),
            ("gammas = [0.0, 0.02]", "gammas = [-0.1]"),
            ("chi_max = 64", "chi_max = 0"),
        ] {
            assert!(ExperimentConfig::from_toml_str(&EXAMPLE.replace(from, to)).is_err(), "{to}");
        }
        let ed_bond = EXAMPLE
            .replace("kind = \"mpdo\"\nschmidt_cutoff = 1e-5\nchi_max = 64", "kind = \"ed\"")
            .replace("t_max = 1.0", "t_max = 1.0\nobservables = [\"max_bond_dim\"]");
        assert!(ExperimentConfig::from_toml_str(&ed_bond).is_err());
    }

    #[test]
    fn presets_validate() {
        for p in [Preset::ChainN32, Preset::BenchN8, Preset::CircuitN6] {
            ExperimentConfig::preset(p).validate().unwrap();
        }
        let c = ExperimentConfig::preset(Preset::CircuitN6);
        assert_eq!(c.time_grid().len(), 121);
    }

    #[test]
    fn circuit_calibration() {
        // five channels of p per step match e^{-4 γ δt}
        let p = circuit_probability(0.025, 6, 0.05).unwrap();
        assert!(((1.0 - p).powi(5) - (-4.0f64 * 0.025 * 0.05).exp()).abs() < 1e-15);
        assert!((p - 0.001).abs() < 1e-6);
    }
}
