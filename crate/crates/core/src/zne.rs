//! Richardson zero-noise extrapolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HamiltonianParams, NoiseParams};

/// Σ|β| above this is logged as ill-conditioned.
pub const CONDITIONING_WARN: f64 = 100.0;

/// Noise scale factors `1 = α₀ < α₁ < …` with their Richardson weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZneSchedule {
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl ZneSchedule {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::EmptySchedule);
        }
        if alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("scale factors must be finite".into()));
        }
        if alphas[0] != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "first scale factor must be 1, got {}",
                alphas[0]
            )));
        }
        for w in alphas.windows(2) {
            if w[1] == w[0] {
                return Err(Error::DegenerateNodes(w[0]));
            }
            if w[1] < w[0] {
                return Err(Error::InvalidParameter(format!(
                    "scale factors must be strictly increasing: {alphas:?}"
                )));
            }
        }
        let betas = richardson_coefficients(&alphas)?;
        let amp = noise_amplification(&betas);
        if amp > CONDITIONING_WARN {
            log::warn!("Richardson schedule {alphas:?} amplifies noise by sum|beta| = {amp:.3e}");
        }
        Ok(ZneSchedule { alphas, betas })
    }

    /// The `{1, 1.5, 2}` schedule.
    pub fn default_schedule() -> Self {
        ZneSchedule::new(vec![1.0, 1.5, 2.0]).expect("valid literal schedule")
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn noise_amplification(&self) -> f64 {
        noise_amplification(&self.betas)
    }
}

fn noise_amplification(betas: &[f64]) -> f64 {
    betas.iter().map(|b| b.abs()).sum()
}

/// `β_k = Π_{i≠k} α_i / (α_i − α_k)`.
pub fn richardson_coefficients(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::EmptySchedule);
    }
    for (i, a) in alphas.iter().enumerate() {
        if alphas[..i].contains(a) {
            return Err(Error::DegenerateNodes(*a));
        }
    }
    Ok((0..alphas.len())
        .map(|k| {
            alphas
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &ai)| ai / (ai - alphas[k]))
                .product()
        })
        .collect())
}

pub fn extrapolate(schedule: &ZneSchedule, values: &[f64]) -> Result<f64> {
    if values.len() != schedule.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.len(),
            got: values.len(),
        });
    }
    Ok(schedule.betas.iter().zip(values).map(|(b, v)| b * v).sum())
}

/// Pointwise extrapolation of one series per scale factor, all on the same
/// time grid. Series are given in schedule order as `(t_grid, values)`.
pub fn extrapolate_series(schedule: &ZneSchedule, series: &[(&[f64], &[f64])]) -> Result<Vec<f64>> {
    if series.len() != schedule.len() {
        return Err(Error::LengthMismatch {
            expected: schedule.len(),
            got: series.len(),
        });
    }
    let (grid, _) = series[0];
    for (k, (t, v)) in series.iter().enumerate() {
        if v.len() != t.len() {
            return Err(Error::LengthMismatch {
                expected: t.len(),
                got: v.len(),
            });
        }
        if *t != grid {
            return Err(Error::GridMismatch(format!(
                "series {k} (alpha = {}) has a different time grid",
                schedule.alphas[k]
            )));
        }
    }
    let mut column = vec![0.0; series.len()];
    (0..grid.len())
        .map(|i| {
            for (c, (_, v)) in column.iter_mut().zip(series) {
                *c = v[i];
            }
            extrapolate(schedule, &column)
        })
        .collect()
}

/// Rate picture of noise scaling: `γ → αγ`.
pub fn scale_noise_lindblad(noise: &NoiseParams, alpha: f64) -> Result<NoiseParams> {
    check_alpha(alpha)?;
    NoiseParams::new(alpha * noise.gamma)
}

/// Stretch picture: `H → H/α`, to be evolved for time `αt` at the original
/// rate. Equivalent to [`scale_noise_lindblad`] for time-independent `H`.
pub fn stretch_hamiltonian(params: &HamiltonianParams, alpha: f64) -> Result<HamiltonianParams> {
    check_alpha(alpha)?;
    HamiltonianParams::new(params.n, params.jz / alpha, params.jx / alpha, params.hx / alpha)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale factor must be >= 1, got {alpha}")));
    }
    Ok(())
}
