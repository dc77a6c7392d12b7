//! Summaries recorded during training.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation grid for the toy discriminator curve: 201 points on `[-4, 2]`.
pub const TOY_GRID_POINTS: usize = 201;
pub const TOY_GRID_RANGE: (f64, f64) = (-4.0, 2.0);
/// A ring mode counts as covered when this fraction of samples is captured.
pub const DEFAULT_MIN_FRACTION: f64 = 0.01;
/// Capture radius around each ring center (ten component standard deviations).
pub const DEFAULT_CAPTURE_RADIUS: f64 = 0.2;

pub fn toy_grid() -> Vec<f64> {
    let (lo, hi) = TOY_GRID_RANGE;
    (0..TOY_GRID_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (TOY_GRID_POINTS - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iter: usize,
    pub sigma: f64,
    pub disc_objective: f64,
    /// `(1/m2) Σ f1(D(G(z_j)))`
    pub gen_adversarial: f64,
    /// Kernel penalty; zero for the baselines.
    pub gen_penalty: f64,
    pub quantile90: Option<f64>,
    /// Discriminator at the data atom.
    pub d_at_atom: Option<f64>,
    pub modes_covered: Option<usize>,
    pub hq_fraction: Option<f64>,
    /// Discriminator on [`toy_grid`]; empty for 2-D runs.
    pub disc_grid: Vec<f64>,
}

/// Order-statistic quantile with linear interpolation between neighbours
/// (position `q·(n-1)` in the sorted sample).
pub fn sample_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("quantile of an empty sample".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1], got {q}")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("quantile of a sample containing NaN".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(s[lo] + (pos - lo as f64) * (s[hi] - s[lo]))
}

/// `(modes covered, fraction of samples near any center)`.
pub fn mode_coverage(
    samples: ArrayView2<f64>,
    centers: &[[f64; 2]],
    capture_radius: f64,
    min_fraction: f64,
) -> Result<(usize, f64)> {
    if !(capture_radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capture radius must be positive, got {capture_radius}"
        )));
    }
    if samples.ncols() != 2 {
        return Err(Error::Dimension {
            what: "sample dimension",
            expected: 2,
            got: samples.ncols(),
        });
    }
    let n = samples.nrows();
    if n == 0 {
        return Ok((0, 0.0));
    }
    let r2 = capture_radius * capture_radius;
    let mut per_mode = vec![0usize; centers.len()];
    let mut captured = 0usize;
    for row in samples.rows() {
        let mut hit = false;
        for (count, c) in per_mode.iter_mut().zip(centers) {
            let d2 = (row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2);
            if d2 <= r2 {
                *count += 1;
                hit = true;
            }
        }
        if hit {
            captured += 1;
        }
    }
    let covered = per_mode
        .iter()
        .filter(|&&c| c as f64 >= min_fraction * n as f64)
        .count();
    Ok((covered, captured as f64 / n as f64))
}
