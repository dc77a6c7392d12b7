//! Unnormalized Gaussian-kernel estimates of the generated distribution at
//! data points, and the bandwidth schedules used during training.

use ndarray::{ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// `k_σ(x) = exp(-‖x‖² / σ²)`. No normalizing constant: the kernel peaks at 1.
pub fn gaussian_kernel(x: &[f64], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let sq: f64 = x.iter().map(|v| v * v).sum();
    Ok((-sq / (sigma * sigma)).exp())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {sigma}"
        )))
    }
}

#[inline]
fn kernel_between(a: ArrayView1<f64>, b: ArrayView1<f64>, sigma_sq: f64) -> f64 {
    let sq: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / sigma_sq).exp()
}

/// `p̂_i = (1/m) Σ_j k_σ(s_j - x_i)` for every target row `x_i`.
pub fn estimate_probs(targets: ArrayView2<f64>, samples: ArrayView2<f64>, sigma: f64) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    if samples.nrows() == 0 {
        return Err(Error::InvalidArgument("no samples to estimate from".into()));
    }
    check_len("sample dimension", targets.ncols(), samples.ncols())?;
    let sigma_sq = sigma * sigma;
    let m = samples.nrows() as f64;
    Ok(targets
        .axis_iter(Axis(0))
        .map(|x| {
            samples
                .axis_iter(Axis(0))
                .map(|s| kernel_between(s, x, sigma_sq))
                .sum::<f64>()
                / m
        })
        .collect())
}

/// Which quantity the schedule's values describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthParam {
    Sigma,
    SigmaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthSchedule {
    Constant {
        value: f64,
        param: BandwidthParam,
    },
    /// `sigma0` before `change_at`, `sigma1` from then on.
    StepChange {
        sigma0: f64,
        sigma1: f64,
        change_at: usize,
        param: BandwidthParam,
    },
    /// `sigma0 · base^(t / period)` with a fractional exponent.
    GeometricDecay {
        sigma0: f64,
        decay_base: f64,
        decay_period: f64,
        param: BandwidthParam,
    },
}

impl BandwidthSchedule {
    /// σ = 0.5 switching to σ = 0.1 at iteration 2000.
    pub fn toy_default() -> Self {
        BandwidthSchedule::StepChange {
            sigma0: 0.5,
            sigma1: 0.1,
            change_at: 2000,
            param: BandwidthParam::Sigma,
        }
    }

    /// σ² = 0.1 · 0.8^(t/2000).
    pub fn gauss8_default() -> Self {
        BandwidthSchedule::GeometricDecay {
            sigma0: 0.1,
            decay_base: 0.8,
            decay_period: 2000.0,
            param: BandwidthParam::SigmaSquared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BandwidthSchedule::Constant { value, .. } => value > 0.0 && value.is_finite(),
            BandwidthSchedule::StepChange { sigma0, sigma1, .. } => {
                sigma0 > 0.0 && sigma1 > 0.0 && sigma0.is_finite() && sigma1.is_finite()
            }
            BandwidthSchedule::GeometricDecay {
                sigma0,
                decay_base,
                decay_period,
                ..
            } => sigma0 > 0.0 && decay_base > 0.0 && decay_period > 0.0 && sigma0.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid bandwidth schedule {self:?}")))
        }
    }

    /// Scheduled value at iteration `t`, in the schedule's own parameter.
    pub fn bandwidth_at(&self, t: usize) -> f64 {
        match *self {
            BandwidthSchedule::Constant { value, .. } => value,
            BandwidthSchedule::StepChange {
                sigma0,
                sigma1,
                change_at,
                ..
            } => {
                if t < change_at {
                    sigma0
                } else {
                    sigma1
                }
            }
            BandwidthSchedule::GeometricDecay {
                sigma0,
                decay_base,
                decay_period,
                ..
            } => sigma0 * decay_base.powf(t as f64 / decay_period),
        }
    }

    fn param(&self) -> BandwidthParam {
        match *self {
            BandwidthSchedule::Constant { param, .. }
            | BandwidthSchedule::StepChange { param, .. }
            | BandwidthSchedule::GeometricDecay { param, .. } => param,
        }
    }

    /// The kernel's σ at iteration `t`.
    pub fn sigma_at(&self, t: usize) -> f64 {
        let v = self.bandwidth_at(t);
        match self.param() {
            BandwidthParam::Sigma => v,
            BandwidthParam::SigmaSquared => v.sqrt(),
        }
    }
}
