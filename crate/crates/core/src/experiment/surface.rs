use std::path::Path;

use serde::{Deserialize, Serialize};

use super::series::{format_number, TimeSeries};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.04;

/// Normalized deviation ε(γ, t) of mitigated from ideal dynamics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurface {
    pub observable: String,
    pub gamma_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `epsilon[g][i]` for `gamma_grid[g]` and `t_grid[i]`.
    pub epsilon: Vec<Vec<f64>>,
    pub threshold: f64,
    /// `(γ, t*)` with `t*` the last time before ε first reaches the
    /// threshold.
    pub threshold_curve: Vec<(f64, f64)>,
}

/// `ε = |ideal − mitigated| / (max ideal − min ideal)`, normalized over the
/// whole recorded window.
pub fn error_surface(
    ideal: &TimeSeries,
    mitigated: &[(f64, &TimeSeries)],
    observable: &str,
    threshold: f64,
) -> Result<ErrorSurface> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!("threshold must be > 0, got {threshold}")));
    }
    let reference = ideal.column(observable)?;
    let (lo, hi) = reference
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::Domain(format!(
            "ideal {observable} has no range to normalize by (max = min = {hi})"
        )));
    }
    let mut gamma_grid = Vec::with_capacity(mitigated.len());
    let mut epsilon = Vec::with_capacity(mitigated.len());
    let mut threshold_curve = Vec::with_capacity(mitigated.len());
    for (gamma, series) in mitigated {
        if series.t_grid() != ideal.t_grid() {
            return Err(Error::GridMismatch(format!("mitigated series at gamma = {gamma}")));
        }
        let eps: Vec<f64> = series
            .column(observable)?
            .iter()
            .zip(reference)
            .map(|(m, r)| (r - m).abs() / range)
            .collect();
        threshold_curve.push((*gamma, first_crossing(ideal.t_grid(), &eps, threshold)));
        gamma_grid.push(*gamma);
        epsilon.push(eps);
    }
    Ok(ErrorSurface {
        observable: observable.to_string(),
        gamma_grid,
        t_grid: ideal.t_grid().to_vec(),
        epsilon,
        threshold,
        threshold_curve,
    })
}

/// Largest `t` with `ε(t') < threshold` for every `t' ≤ t`. When the first
/// point already fails, the first grid time is returned.
fn first_crossing(t: &[f64], eps: &[f64], threshold: f64) -> f64 {
    let ok = eps.iter().take_while(|&&e| e < threshold).count();
    match ok {
        0 => t.first().copied().unwrap_or(0.0),
        k => t[k - 1],
    }
}

impl ErrorSurface {
    /// Long format: `gamma,t,epsilon`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
        w.write_record(["gamma", "t", "epsilon"]).map_err(|e| Error::Serde(e.to_string()))?;
        for (g, row) in self.gamma_grid.iter().zip(&self.epsilon) {
            for (t, e) in self.t_grid.iter().zip(row) {
                w.write_record([format_number(*g), format_number(*t), format_number(*e)])
                    .map_err(|e| Error::Serde(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_threshold_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
        w.write_record(["gamma", "t_star"]).map_err(|e| Error::Serde(e.to_string()))?;
        for (g, t) in &self.threshold_curve {
            w.write_record([format_number(*g), format_number(*t)])
                .map_err(|e| Error::Serde(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Whether `t*` never increases with `γ`.
    pub fn threshold_monotone(&self) -> bool {
        let mut curve = self.threshold_curve.clone();
        curve.sort_by(|a, b| a.0.total_cmp(&b.0));
        curve.windows(2).all(|w| w[1].1 <= w[0].1)
    }
}
