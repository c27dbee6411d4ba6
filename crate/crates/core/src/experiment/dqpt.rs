//! Descriptive diagnostic for noise-induced splitting of return-rate peaks.

use serde::{Deserialize, Serialize};

use super::series::TimeSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqptOptions {
    /// Half width of the window around each ideal peak, in units of 1/J.
    pub half_width: f64,
    /// Minimum prominence of an ideal λ peak to count as a DQPT candidate.
    pub peak_prominence: f64,
    /// Minimum prominence of extrema inside a window.
    pub extremum_prominence: f64,
}

impl Default for DqptOptions {
    fn default() -> Self {
        DqptOptions {
            half_width: 0.5,
            peak_prominence: 1e-2,
            extremum_prominence: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSignature {
    pub gamma: f64,
    pub maxima: Vec<f64>,
    pub minima: Vec<f64>,
    /// A minimum with a maximum on each side inside the window.
    pub doubling: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqptWindow {
    pub t_peak: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub ideal_maxima: Vec<f64>,
    pub noisy: Vec<WindowSignature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DqptReport {
    pub options: DqptOptions,
    pub windows: Vec<DqptWindow>,
}

impl DqptReport {
    pub fn doubling_count(&self, gamma: f64) -> usize {
        self.windows
            .iter()
            .flat_map(|w| &w.noisy)
            .filter(|s| s.gamma == gamma && s.doubling)
            .count()
    }
}

/// Prominence of the local maximum at `i`: its height above the higher of
/// the two lowest points reached before climbing above `v[i]` on either side.
fn prominence(v: &[f64], i: usize) -> f64 {
    let side_min = |range: &mut dyn Iterator<Item = usize>| {
        let mut lowest = v[i];
        for j in range {
            if v[j] > v[i] {
                break;
            }
            lowest = lowest.min(v[j]);
        }
        lowest
    };
    let left = side_min(&mut (0..i).rev());
    let right = side_min(&mut (i + 1..v.len()));
    v[i] - left.max(right)
}

/// Interior local maxima (plateaus count once, at their left end) with at
/// least the given prominence.
pub fn local_maxima(v: &[f64], min_prominence: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < v.len() {
        if v[i] > v[i - 1] {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            if j + 1 < v.len() && v[j + 1] < v[i] && prominence(v, i) >= min_prominence {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

pub fn local_minima(v: &[f64], min_prominence: f64) -> Vec<usize> {
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    local_maxima(&neg, min_prominence)
}

/// Locate ideal λ peaks and, inside `±half_width` of each, classify every
/// noisy series by whether its λ shows a minimum between two maxima.
pub fn dqpt_window_report(
    ideal: &TimeSeries,
    noisy: &[(f64, &TimeSeries)],
    options: DqptOptions,
) -> Result<DqptReport> {
    let t = ideal.t_grid();
    let lambda = ideal.column("lambda")?;
    let peaks = local_maxima(lambda, options.peak_prominence);
    let (t0, t1) = match (t.first(), t.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Domain("ideal series is empty".into())),
    };
    let mut noisy_extrema = Vec::with_capacity(noisy.len());
    for (gamma, s) in noisy {
        if s.t_grid() != t {
            return Err(Error::GridMismatch(format!("noisy series at gamma = {gamma}")));
        }
        let v = s.column("lambda")?;
        noisy_extrema.push((
            *gamma,
            local_maxima(v, options.extremum_prominence),
            local_minima(v, options.extremum_prominence),
        ));
    }
    let ideal_max = local_maxima(lambda, options.extremum_prominence);
    let in_window = |idx: &[usize], lo: f64, hi: f64| -> Vec<f64> {
        idx.iter().map(|&i| t[i]).filter(|&x| x >= lo && x <= hi).collect()
    };

    let mut windows = Vec::new();
    for &p in &peaks {
        let (lo, hi) = (t[p] - options.half_width, t[p] + options.half_width);
        if lo < t0 - 1e-12 || hi > t1 + 1e-12 {
            continue;
        }
        let signatures = noisy_extrema
            .iter()
            .map(|(gamma, maxima, minima)| {
                let maxima = in_window(maxima, lo, hi);
                let minima = in_window(minima, lo, hi);
                let doubling = minima
                    .iter()
                    .any(|&m| maxima.iter().any(|&a| a < m) && maxima.iter().any(|&b| b > m));
                WindowSignature {
                    gamma: *gamma,
                    maxima,
                    minima,
                    doubling,
                }
            })
            .collect();
        windows.push(DqptWindow {
            t_peak: t[p],
            t_lo: lo,
            t_hi: hi,
            ideal_maxima: in_window(&ideal_max, lo, hi),
            noisy: signatures,
        });
    }
    if windows.is_empty() {
        return Err(Error::Domain(format!(
            "no ideal return-rate peak with a full ±{} window inside [{t0}, {t1}]",
            options.half_width
        )));
    }
    Ok(DqptReport { options, windows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=300).map(|k| k as f64 * 0.01).collect()
    }

    fn bump(t: f64, c: f64, w: f64) -> f64 {
        (-(t - c).powi(2) / (2.0 * w * w)).exp()
    }

    fn series(f: impl Fn(f64) -> f64) -> TimeSeries {
        let t = grid();
        let v = t.iter().map(|&x| f(x)).collect();
        TimeSeries::new(t).unwrap().with("lambda", v).unwrap()
    }

    #[test]
    fn extrema_with_prominence() {
        let v = [0.0, 1.0, 0.5, 0.6, 0.0, 2.0, 2.0, 1.0];
        assert_eq!(local_maxima(&v, 0.0), vec![1, 3, 5]);
        assert_eq!(local_maxima(&v, 0.2), vec![1, 5]);
        assert_eq!(local_minima(&v, 0.0), vec![2, 4]);
        assert!((prominence(&v, 3) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn single_vs_double_peak() {
        let ideal = series(|t| bump(t, 1.5, 0.3));
        let single = series(|t| 0.8 * bump(t, 1.5, 0.3));
        let double = series(|t| 0.5 * bump(t, 1.3, 0.1) + 0.5 * bump(t, 1.7, 0.1));
        let r = dqpt_window_report(&ideal, &[(0.0, &ideal), (0.01, &single), (0.02, &double)], DqptOptions::default())
            .unwrap();
        assert_eq!(r.windows.len(), 1);
        let w = &r.windows[0];
        assert!((w.t_peak - 1.5).abs() < 1e-12);
        assert_eq!(w.ideal_maxima.len(), 1);
        assert_eq!(
            w.noisy.iter().map(|s| s.doubling).collect::<Vec<_>>(),
            vec![false, false, true]
        );
        assert_eq!(r.doubling_count(0.02), 1);
        let m = &w.noisy[2].minima;
        assert_eq!(m.len(), 1);
        assert!((m[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn uncovered_window_is_an_error() {
        // peak too close to the end of the grid
        let s = series(|t| bump(t, 2.8, 0.2));
        assert!(matches!(
            dqpt_window_report(&s, &[], DqptOptions::default()),
            Err(Error::Domain(_))
        ));
        let flat = series(|_| 0.1);
        assert!(dqpt_window_report(&flat, &[], DqptOptions::default()).is_err());
    }
}
