//! Training configuration and the two synthetic experiments.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::divergence::{Divergence, DivergenceKind};
use crate::error::{Error, Result};
use crate::kde::BandwidthSchedule;
use crate::nn::{Activation, ClipSpec, OptimizerKind};

/// Which of the compared training procedures a config realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Jensen-Shannon GAN plus the kernel-density penalty toward the target.
    Proposed,
    /// Jensen-Shannon GAN without the penalty.
    Gan,
    /// Approximate WGAN: ReLU critic output, clipped weights, RMSProp.
    Wgan,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Proposed, Method::Gan, Method::Wgan];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Gan => "gan",
            Method::Wgan => "wgan",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownName {
                kind: "method",
                name: s.to_string(),
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Least-squares fit of the generator to a fixed point before training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub target: Vec<f64>,
    pub steps: usize,
    pub batch: usize,
    pub opt: OptimizerKind,
}

/// Adam with the momentum `β1 = 0.5` customary for adversarial training.
pub fn gan_adam(lr: f64) -> OptimizerKind {
    OptimizerKind::Adam {
        lr,
        beta1: 0.5,
        beta2: 0.999,
        eps_hat: 1e-8,
    }
}

/// Epsilon of the approximate-WGAN objective used by the WGAN baseline.
pub const WGAN_BASELINE_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub divergence: DivergenceKind,
    pub epsilon_wgan: f64,
    /// Output activation of the discriminator.
    pub disc_output: Activation,
    pub disc_hidden: Vec<usize>,
    pub gen_hidden: Vec<usize>,
    /// Discriminator steps per iteration.
    pub k0: usize,
    /// Data minibatch size.
    pub m1: usize,
    /// Noise minibatch size.
    pub m2: usize,
    /// Step size of the dual update that produces the target masses.
    pub alpha_target: f64,
    pub bandwidth: BandwidthSchedule,
    pub disc_opt: OptimizerKind,
    pub gen_opt: OptimizerKind,
    /// Discriminator weight clipping.
    pub clip: Option<ClipSpec>,
    pub iterations: usize,
    pub seed: u64,
    pub proposed_term_enabled: bool,
    pub pretrain: Option<PretrainConfig>,
    /// Discriminator-only steps against the initial generator before the
    /// main loop.
    #[serde(default)]
    pub disc_warmup_steps: usize,
    /// Metrics are recorded every `metrics_stride` iterations and at the end.
    pub metrics_stride: usize,
    /// Generated samples drawn for each metrics row.
    pub eval_samples: usize,
    /// Iterations (0-based, after the update) whose parameters are dumped.
    #[serde(default)]
    pub snapshot_at: Vec<usize>,
}

impl TrainConfig {
    /// Defaults for `method` on `experiment`.
    pub fn for_experiment(experiment: &ExperimentSpec, method: Method) -> Self {
        let (divergence, epsilon_wgan, disc_output, proposed) = match method {
            Method::Proposed => (DivergenceKind::JensenShannon, WGAN_BASELINE_EPSILON, Activation::Sigmoid, true),
            Method::Gan => (DivergenceKind::JensenShannon, WGAN_BASELINE_EPSILON, Activation::Sigmoid, false),
            Method::Wgan => (DivergenceKind::ApproxWgan, WGAN_BASELINE_EPSILON, Activation::Relu, false),
        };
        let wgan = method == Method::Wgan;
        match experiment {
            ExperimentSpec::Toy1d {
                pretrain_target, ..
            } => {
                let opt = if wgan {
                    OptimizerKind::rmsprop(1e-4)
                } else {
                    gan_adam(1e-4)
                };
                TrainConfig {
                    divergence,
                    epsilon_wgan,
                    disc_output,
                    disc_hidden: vec![64],
                    gen_hidden: vec![64],
                    k0: 1,
                    m1: 32,
                    m2: 32,
                    alpha_target: 0.1,
                    bandwidth: BandwidthSchedule::toy_default(),
                    disc_opt: opt,
                    gen_opt: opt,
                    clip: wgan.then(|| ClipSpec::symmetric(1.0).expect("valid")),
                    iterations: 8000,
                    seed: 0,
                    proposed_term_enabled: proposed,
                    pretrain: Some(PretrainConfig {
                        target: vec![*pretrain_target],
                        steps: 2000,
                        batch: 64,
                        opt: OptimizerKind::adam(1e-3),
                    }),
                    disc_warmup_steps: 0,
                    metrics_stride: 100,
                    eval_samples: 1000,
                    snapshot_at: Vec::new(),
                }
            }
            ExperimentSpec::Gauss8 { .. } => {
                let (disc_opt, gen_opt) = if wgan {
                    (OptimizerKind::rmsprop(8e-4), OptimizerKind::rmsprop(4e-4))
                } else {
                    (gan_adam(8e-4), gan_adam(4e-4))
                };
                TrainConfig {
                    divergence,
                    epsilon_wgan,
                    disc_output,
                    disc_hidden: vec![128],
                    gen_hidden: vec![128, 128],
                    k0: 1,
                    m1: 64,
                    m2: 64,
                    alpha_target: 0.1,
                    bandwidth: BandwidthSchedule::gauss8_default(),
                    disc_opt,
                    gen_opt,
                    clip: wgan.then(|| ClipSpec::symmetric(1.0).expect("valid")),
                    iterations: 40_000,
                    seed: 0,
                    proposed_term_enabled: proposed,
                    pretrain: None,
                    disc_warmup_steps: 0,
                    metrics_stride: 1000,
                    eval_samples: 2560,
                    snapshot_at: Vec::new(),
                }
            }
        }
    }

    pub fn divergence_spec(&self) -> Result<Divergence> {
        Divergence::with_params(self.divergence, Some(self.epsilon_wgan), None)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.k0 == 0 {
            return fail("k0 must be at least 1".into());
        }
        if self.m1 == 0 || self.m2 == 0 {
            return fail("minibatch sizes must be at least 1".into());
        }
        if self.proposed_term_enabled && !(self.alpha_target > 0.0) {
            return fail(format!("alpha_target must be positive, got {}", self.alpha_target));
        }
        if !(self.alpha_target >= 0.0) || !self.alpha_target.is_finite() {
            return fail(format!("alpha_target must be finite and >= 0, got {}", self.alpha_target));
        }
        if self.metrics_stride == 0 {
            return fail("metrics_stride must be at least 1".into());
        }
        if self.eval_samples == 0 {
            return fail("eval_samples must be at least 1".into());
        }
        if self.disc_hidden.iter().chain(&self.gen_hidden).any(|w| *w == 0) {
            return fail("hidden widths must be positive".into());
        }
        if let Some(p) = &self.pretrain {
            if p.batch == 0 {
                return fail("pretraining batch must be at least 1".into());
            }
            p.opt.validate()?;
        }
        self.bandwidth.validate()?;
        self.disc_opt.validate()?;
        self.gen_opt.validate()?;
        self.divergence_spec()?;
        Ok(())
    }
}

/// Data distribution and noise distribution of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    /// All data mass at `data_atom`; the generator starts near
    /// `pretrain_target`.
    Toy1d {
        data_atom: f64,
        pretrain_target: f64,
        noise_dim: usize,
    },
    /// Eight Gaussians evenly spaced on a circle.
    Gauss8 {
        radius: f64,
        component_std: f64,
        noise_dim: usize,
    },
}

impl ExperimentSpec {
    pub fn toy1d() -> Self {
        ExperimentSpec::Toy1d {
            data_atom: 1.0,
            pretrain_target: -3.0,
            noise_dim: 1,
        }
    }

    pub fn gauss8() -> Self {
        ExperimentSpec::Gauss8 {
            radius: 2.0,
            component_std: 0.02,
            noise_dim: 256,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::Toy1d { .. } => "toy1d",
            ExperimentSpec::Gauss8 { .. } => "gauss8",
        }
    }

    pub fn data_dim(&self) -> usize {
        match self {
            ExperimentSpec::Toy1d { .. } => 1,
            ExperimentSpec::Gauss8 { .. } => 2,
        }
    }

    pub fn noise_dim(&self) -> usize {
        match *self {
            ExperimentSpec::Toy1d { noise_dim, .. } | ExperimentSpec::Gauss8 { noise_dim, .. } => noise_dim,
        }
    }

    /// Ring centers `radius · (cos 2πk/8, sin 2πk/8)`; empty for the toy.
    pub fn centers(&self) -> Vec<[f64; 2]> {
        match *self {
            ExperimentSpec::Toy1d { .. } => Vec::new(),
            ExperimentSpec::Gauss8 { radius, .. } => (0..8)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / 8.0;
                    [radius * a.cos(), radius * a.sin()]
                })
                .collect(),
        }
    }

    pub fn sample_data<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Array2<f64> {
        match *self {
            ExperimentSpec::Toy1d { data_atom, .. } => Array2::from_elem((m, 1), data_atom),
            ExperimentSpec::Gauss8 { component_std, .. } => {
                let centers = self.centers();
                let mut out = Array2::zeros((m, 2));
                for mut row in out.rows_mut() {
                    let c = centers[rng.random_range(0..centers.len())];
                    for (v, cv) in row.iter_mut().zip(c) {
                        let e: f64 = StandardNormal.sample(rng);
                        *v = cv + component_std * e;
                    }
                }
                out
            }
        }
    }

    /// Standard normal noise of width [`noise_dim`](Self::noise_dim).
    pub fn sample_noise<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Array2<f64> {
        sample_normal(m, self.noise_dim(), rng)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ExperimentSpec::Toy1d {
                data_atom,
                pretrain_target,
                noise_dim,
            } => data_atom.is_finite() && pretrain_target.is_finite() && noise_dim > 0,
            ExperimentSpec::Gauss8 {
                radius,
                component_std,
                noise_dim,
            } => radius > 0.0 && component_std >= 0.0 && noise_dim > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid experiment {self:?}")))
        }
    }
}

impl FromStr for ExperimentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "toy1d" | "toy" => Ok(Self::toy1d()),
            "gauss8" | "8gaussians" => Ok(Self::gauss8()),
            _ => Err(Error::UnknownName {
                kind: "experiment",
                name: s.to_string(),
            }),
        }
    }
}

pub(crate) fn sample_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}
