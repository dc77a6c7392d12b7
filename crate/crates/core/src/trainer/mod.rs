//! Parameterized GAN training: discriminator ascent, the dual update of the
//! generated masses at the data points, and generator descent toward that
//! target through a kernel estimate. The baselines are the same loop with the
//! penalty switched off.

mod config;
mod metrics;
mod steps;

pub use config::{gan_adam, ExperimentSpec, Method, PretrainConfig, TrainConfig, WGAN_BASELINE_EPSILON};
pub use metrics::{
    mode_coverage, sample_quantile, toy_grid, MetricsRow, DEFAULT_CAPTURE_RADIUS, DEFAULT_MIN_FRACTION,
    TOY_GRID_POINTS, TOY_GRID_RANGE,
};
pub use steps::{
    compute_target_probs, constraint_values, discriminator_objective, discriminator_step,
    generator_objective, generator_step, locally_constant_discriminator, penalty_and_grad,
    pretrain_generator, targets_from_constraints, GeneratorLoss, GeneratorObjective, Nets,
};

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::divergence::Divergence;
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Optimizer};

/// Random stream used for evaluation noise, separate from training.
const EVAL_STREAM: u64 = 1;

/// Parameters of both networks after a given iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iter: usize,
    pub generator: Vec<f64>,
    pub discriminator: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub rows: Vec<MetricsRow>,
    /// Generated samples from the final generator on the evaluation noise.
    pub final_samples: Array2<f64>,
    pub nets: Nets,
    pub snapshots: Vec<Snapshot>,
}

/// Builds both networks with Xavier weights from `rng`.
pub fn build_nets<R: rand::Rng + ?Sized>(
    config: &TrainConfig,
    experiment: &ExperimentSpec,
    rng: &mut R,
) -> Result<Nets> {
    let mut g_layers: Vec<(usize, Activation)> =
        config.gen_hidden.iter().map(|&w| (w, Activation::Relu)).collect();
    g_layers.push((experiment.data_dim(), Activation::Linear));
    let mut d_layers: Vec<(usize, Activation)> =
        config.disc_hidden.iter().map(|&w| (w, Activation::Relu)).collect();
    d_layers.push((1, config.disc_output));
    Ok(Nets {
        generator: Mlp::new(experiment.noise_dim(), &g_layers, rng)?,
        discriminator: Mlp::new(experiment.data_dim(), &d_layers, rng)?,
    })
}

fn with_iter(e: Error, t: usize) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, t },
        other => other,
    }
}

struct Evaluator {
    noise: Array2<f64>,
    grid: Option<Array2<f64>>,
    atom: Option<f64>,
    centers: Vec<[f64; 2]>,
}

impl Evaluator {
    fn new(config: &TrainConfig, experiment: &ExperimentSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(EVAL_STREAM);
        let noise = experiment.sample_noise(config.eval_samples, &mut rng);
        let (grid, atom) = match experiment {
            ExperimentSpec::Toy1d { data_atom, .. } => {
                let g = toy_grid();
                (Some(Array2::from_shape_vec((g.len(), 1), g).expect("column")), Some(*data_atom))
            }
            ExperimentSpec::Gauss8 { .. } => (None, None),
        };
        Self {
            noise,
            grid,
            atom,
            centers: experiment.centers(),
        }
    }

    fn disc_values(disc: &Mlp, points: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(disc.predict(points.view())?.column(0).to_vec())
    }

    fn row(&self, nets: &Nets, base: MetricsRow) -> Result<(MetricsRow, Array2<f64>)> {
        let samples = nets.generator.predict(self.noise.view())?;
        let mut row = base;
        if let Some(grid) = &self.grid {
            row.disc_grid = Self::disc_values(&nets.discriminator, grid)?;
            let q = sample_quantile(&first_column(&samples), 0.9)?;
            row.quantile90 = Some(q);
        }
        if let Some(a) = self.atom {
            let at = Array2::from_elem((1, 1), a);
            row.d_at_atom = Some(Self::disc_values(&nets.discriminator, &at)?[0]);
        }
        if !self.centers.is_empty() {
            let (count, hq) =
                mode_coverage(samples.view(), &self.centers, DEFAULT_CAPTURE_RADIUS, DEFAULT_MIN_FRACTION)?;
            row.modes_covered = Some(count);
            row.hq_fraction = Some(hq);
        }
        Ok((row, samples))
    }
}

/// Runs the full loop. Deterministic for a given config (the seed included).
pub fn train(config: &TrainConfig, experiment: &ExperimentSpec) -> Result<TrainOutput> {
    train_with_progress(config, experiment, |_| {})
}

/// Like [`train`], calling `progress` with each metrics row as it is recorded.
pub fn train_with_progress<F: FnMut(&MetricsRow)>(
    config: &TrainConfig,
    experiment: &ExperimentSpec,
    mut progress: F,
) -> Result<TrainOutput> {
    config.validate()?;
    experiment.validate()?;
    let spec: Divergence = config.divergence_spec()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nets = build_nets(config, experiment, &mut rng)?;
    if let Some(p) = &config.pretrain {
        let mut opt = Optimizer::new(p.opt, &nets.generator);
        pretrain_generator(
            &mut nets.generator,
            &p.target,
            p.steps,
            &mut opt,
            p.batch,
            |m, r| experiment.sample_noise(m, r),
            &mut rng,
        )?;
    }
    let mut d_opt = Optimizer::new(config.disc_opt, &nets.discriminator);
    let mut g_opt = Optimizer::new(config.gen_opt, &nets.generator);
    for _ in 0..config.disc_warmup_steps {
        let data = experiment.sample_data(config.m1, &mut rng);
        let noise = experiment.sample_noise(config.m2, &mut rng);
        let fake = nets.generator.predict(noise.view())?;
        discriminator_step(
            &mut nets.discriminator,
            &mut d_opt,
            &spec,
            data.view(),
            fake.view(),
            config.clip.as_ref(),
        )?;
    }
    let eval = Evaluator::new(config, experiment);

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut final_samples = None;
    for t in 0..config.iterations {
        let data = experiment.sample_data(config.m1, &mut rng);
        let noise = experiment.sample_noise(config.m2, &mut rng);
        let fake = nets.generator.predict(noise.view())?;
        let mut disc_objective = f64::NAN;
        for _ in 0..config.k0 {
            disc_objective = discriminator_step(
                &mut nets.discriminator,
                &mut d_opt,
                &spec,
                data.view(),
                fake.view(),
                config.clip.as_ref(),
            )
            .map_err(|e| with_iter(e, t))?;
        }

        let sigma = config.bandwidth.sigma_at(t);
        let targets = if config.proposed_term_enabled {
            let f1 = constraint_values(&nets.discriminator, &spec, data.view())?;
            targets_from_constraints(data.view(), fake.view(), &f1, config.alpha_target, sigma)?
        } else {
            Vec::new()
        };
        let obj = GeneratorObjective {
            spec: &spec,
            data: data.view(),
            targets: &targets,
            sigma,
            proposed_term: config.proposed_term_enabled,
        };
        let loss = generator_step(&mut nets, &mut g_opt, noise.view(), &obj).map_err(|e| with_iter(e, t))?;
        if !nets.generator.is_finite() || !nets.discriminator.is_finite() {
            return Err(Error::NonFinite {
                what: "network parameters",
                t,
            });
        }

        if config.snapshot_at.contains(&t) {
            snapshots.push(Snapshot {
                iter: t,
                generator: nets.generator.flat_params(),
                discriminator: nets.discriminator.flat_params(),
            });
        }
        let last = t + 1 == config.iterations;
        if t % config.metrics_stride == 0 || last {
            let base = MetricsRow {
                iter: t,
                sigma,
                disc_objective,
                gen_adversarial: loss.adversarial,
                gen_penalty: loss.penalty,
                quantile90: None,
                d_at_atom: None,
                modes_covered: None,
                hq_fraction: None,
                disc_grid: Vec::new(),
            };
            let (row, samples) = eval.row(&nets, base)?;
            progress(&row);
            rows.push(row);
            if last {
                final_samples = Some(samples);
            }
        }
    }
    let final_samples = match final_samples {
        Some(s) => s,
        None => nets.generator.predict(eval.noise.view())?,
    };
    Ok(TrainOutput {
        rows,
        final_samples,
        nets,
        snapshots,
    })
}

/// Convenience accessor for 1-D generated samples.
pub fn first_column(samples: &Array2<f64>) -> Vec<f64> {
    samples.index_axis(Axis(1), 0).to_vec()
}
