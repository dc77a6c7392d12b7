//! Objective/constraint pairs `(f0, f1)` that turn the per-point program
//!
//! ```text
//! maximize Σ_i p_d(x_i) f0(D_i)  subject to  f1(D_i) >= 0
//! ```
//!
//! into the familiar GAN variants. The Lagrangian dual of constraint `i` plays
//! the role of the generated probability `p_g(x_i)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default box parameter for Jensen-Shannon: `D_i in [ε, 1 - ε]`.
pub const DEFAULT_JS_EPSILON: f64 = 0.05;
/// Default curvature for the approximate WGAN objective `D - εD²`.
pub const DEFAULT_WGAN_EPSILON: f64 = 0.1;
/// Finite bound used in place of `±∞` for the unbounded rows.
pub const DOMAIN_BOUND: f64 = 100.0;
/// Left endpoint used in place of `0` for rows whose functions blow up at 0.
pub const POSITIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Kl,
    ReverseKl,
    PearsonChi2,
    SquaredHellinger,
    JensenShannon,
    ApproxWgan,
    QuadraticOther,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 7] = [
        Self::Kl,
        Self::ReverseKl,
        Self::PearsonChi2,
        Self::SquaredHellinger,
        Self::JensenShannon,
        Self::ApproxWgan,
        Self::QuadraticOther,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Kl => "kl",
            Self::ReverseKl => "reverse_kl",
            Self::PearsonChi2 => "pearson_chi2",
            Self::SquaredHellinger => "squared_hellinger",
            Self::JensenShannon => "jensen_shannon",
            Self::ApproxWgan => "approx_wgan",
            Self::QuadraticOther => "quadratic_other",
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.to_ascii_lowercase().replace('-', "_");
        let kind = match normalized.as_str() {
            "js" => Self::JensenShannon,
            "wgan" => Self::ApproxWgan,
            "pearson" => Self::PearsonChi2,
            "hellinger" => Self::SquaredHellinger,
            other => match Self::ALL.iter().find(|k| k.name() == other) {
                Some(k) => *k,
                None => {
                    return Err(Error::UnknownName {
                        kind: "divergence",
                        name: s.to_string(),
                    })
                }
            },
        };
        Ok(kind)
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo < hi);
        Self { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn contains_strictly(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Optimal discriminator value, possibly pinned to a domain endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalD {
    pub value: f64,
    /// The unclamped formula fell outside the domain (or was undefined).
    pub clamped: bool,
}

/// One GAN variant: `f0`, `f1`, their derivatives, the optimal discriminator
/// and the interval on which both functions are finite and concave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub kind: DivergenceKind,
    pub domain: Interval,
    /// Only read by [`DivergenceKind::ApproxWgan`].
    pub epsilon_wgan: f64,
}

impl Divergence {
    /// Builds a divergence with default domain and `ε`.
    pub fn new(kind: DivergenceKind) -> Self {
        Self::with_params(kind, None, None).expect("defaults are valid")
    }

    /// `epsilon_wgan` defaults to 0.1; `js_epsilon` (the box `[ε, 1 - ε]`)
    /// defaults to 0.05. Each is ignored by rows that do not use it.
    pub fn with_params(
        kind: DivergenceKind,
        epsilon_wgan: Option<f64>,
        js_epsilon: Option<f64>,
    ) -> Result<Self> {
        let epsilon_wgan = epsilon_wgan.unwrap_or(DEFAULT_WGAN_EPSILON);
        if !(epsilon_wgan > 0.0) || !epsilon_wgan.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "approx_wgan epsilon must be positive, got {epsilon_wgan}"
            )));
        }
        let js_eps = js_epsilon.unwrap_or(DEFAULT_JS_EPSILON);
        if !(js_eps > 0.0 && js_eps < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "Jensen-Shannon box parameter must lie in (0, 1/2), got {js_eps}"
            )));
        }
        let domain = match kind {
            DivergenceKind::JensenShannon => Interval::new(js_eps, 1.0 - js_eps),
            DivergenceKind::Kl | DivergenceKind::ReverseKl | DivergenceKind::SquaredHellinger => {
                Interval::new(POSITIVE_FLOOR, DOMAIN_BOUND)
            }
            DivergenceKind::PearsonChi2
            | DivergenceKind::ApproxWgan
            | DivergenceKind::QuadraticOther => Interval::new(-DOMAIN_BOUND, DOMAIN_BOUND),
        };
        Ok(Self {
            kind,
            domain,
            epsilon_wgan,
        })
    }

    /// Looks a divergence up by name (`js`, `kl`, `approx_wgan`, ...).
    pub fn by_name(name: &str, epsilon_wgan: Option<f64>) -> Result<Self> {
        Self::with_params(name.parse()?, epsilon_wgan, None)
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn f0(&self, d: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl | DivergenceKind::JensenShannon => d.ln(),
            DivergenceKind::ReverseKl => -d,
            DivergenceKind::PearsonChi2 => d,
            DivergenceKind::SquaredHellinger => 1.0 - d,
            DivergenceKind::ApproxWgan => d - self.epsilon_wgan * d * d,
            DivergenceKind::QuadraticOther => -0.5 * d * d + d,
        }
    }

    pub fn f0_deriv(&self, d: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl | DivergenceKind::JensenShannon => 1.0 / d,
            DivergenceKind::ReverseKl | DivergenceKind::SquaredHellinger => -1.0,
            DivergenceKind::PearsonChi2 => 1.0,
            DivergenceKind::ApproxWgan => 1.0 - 2.0 * self.epsilon_wgan * d,
            DivergenceKind::QuadraticOther => 1.0 - d,
        }
    }

    pub fn f1(&self, d: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => 1.0 - d,
            DivergenceKind::ReverseKl => d.ln(),
            DivergenceKind::PearsonChi2 => -0.25 * d * d - d,
            DivergenceKind::SquaredHellinger => 1.0 - 1.0 / d,
            // log(1 - d) - log(1/2) = log(2(1 - d))
            DivergenceKind::JensenShannon => (2.0 * (1.0 - d)).ln(),
            DivergenceKind::ApproxWgan => -d,
            DivergenceKind::QuadraticOther => d - 2.0,
        }
    }

    pub fn f1_deriv(&self, d: f64) -> f64 {
        match self.kind {
            DivergenceKind::Kl => -1.0,
            DivergenceKind::ReverseKl => 1.0 / d,
            DivergenceKind::PearsonChi2 => -0.5 * d - 1.0,
            DivergenceKind::SquaredHellinger => 1.0 / (d * d),
            DivergenceKind::JensenShannon => -1.0 / (1.0 - d),
            DivergenceKind::ApproxWgan => -1.0,
            DivergenceKind::QuadraticOther => 1.0,
        }
    }

    /// Stationary point of `d ↦ p_d f0(d) + p_g f1(d)`, before clamping.
    /// `None` when the formula is `0/0`.
    pub fn d_star_raw(&self, p_d: f64, p_g: f64) -> Option<f64> {
        let (num, den) = match self.kind {
            DivergenceKind::Kl => (p_d, p_g),
            DivergenceKind::ReverseKl => (p_g, p_d),
            DivergenceKind::PearsonChi2 => (2.0 * (p_d - p_g), p_g),
            DivergenceKind::SquaredHellinger => {
                return if p_d == 0.0 && p_g == 0.0 {
                    None
                } else if p_d == 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some((p_g / p_d).sqrt())
                };
            }
            DivergenceKind::JensenShannon => (p_d, p_d + p_g),
            DivergenceKind::ApproxWgan => (p_d - p_g, 2.0 * self.epsilon_wgan * p_d),
            DivergenceKind::QuadraticOther => (p_d + p_g, p_d),
        };
        if den == 0.0 {
            if num == 0.0 {
                None
            } else {
                Some(num.signum() * f64::INFINITY)
            }
        } else {
            Some(num / den)
        }
    }

    /// Maximizer of `p_d f0(d) + p_g f1(d)` over the domain.
    ///
    /// A vanishing denominator sends the value to the endpoint the formula
    /// diverges toward; an undefined `0/0` (both masses zero) returns the
    /// midpoint of the domain. Both cases are flagged as clamped.
    pub fn optimal_discriminator(&self, p_d: f64, p_g: f64) -> OptimalD {
        match self.d_star_raw(p_d, p_g) {
            None => OptimalD {
                value: 0.5 * (self.domain.lo + self.domain.hi),
                clamped: true,
            },
            Some(raw) => {
                let value = self.domain.clamp(raw);
                OptimalD {
                    value,
                    clamped: value != raw,
                }
            }
        }
    }

    /// Value of the discriminator at the saddle, where `p_g = p_d`.
    pub fn saddle_discriminator(&self, p_d: f64) -> f64 {
        self.optimal_discriminator(p_d, p_d).value
    }

    /// Brute-force check of [`optimal_discriminator`](Self::optimal_discriminator):
    /// maximizes `p_d f0 + p_g f1` over the grid `lo + k·resolution` of the
    /// domain and returns the distance between the grid argmax and the closed
    /// form.
    ///
    /// The objective is concave, so the grid is scanned coarse-to-fine: a pass
    /// at `100 × resolution` locates the maximizer to within one coarse cell,
    /// then every fine grid point in the two neighbouring coarse cells is
    /// evaluated.
    pub fn verify_optimality(&self, p_d: f64, p_g: f64, resolution: f64) -> Result<f64> {
        if !(resolution > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        let lo = self.domain.lo;
        let n = (self.domain.width() / resolution).floor() as usize;
        let value = |k: usize| {
            let d = lo + k as f64 * resolution;
            p_d * self.f0(d) + p_g * self.f1(d)
        };
        let argmax = |range: std::ops::RangeInclusive<usize>, step: usize| {
            let mut best = (*range.start(), f64::NEG_INFINITY);
            let mut k = *range.start();
            while k <= *range.end() {
                let v = value(k);
                if v > best.1 {
                    best = (k, v);
                }
                k += step;
            }
            best.0
        };
        let coarse = 100usize;
        let k_coarse = argmax(0..=n, coarse.min(n.max(1)));
        let start = k_coarse.saturating_sub(2 * coarse);
        let end = (k_coarse + 2 * coarse).min(n);
        let k_best = argmax(start..=end, 1);
        let grid_best = lo + k_best as f64 * resolution;
        Ok((grid_best - self.optimal_discriminator(p_d, p_g).value).abs())
    }
}
