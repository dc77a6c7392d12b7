//! The three updates of one training iteration: discriminator ascent, the
//! dual step on the generated distribution, and the generator descent that
//! pulls the kernel estimate toward the dual-updated target.

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use crate::divergence::{Divergence, DivergenceKind};
use crate::error::{check_len, Error, Result};
use crate::kde;
use crate::nn::{self, Activation, ClipSpec, Direction, ForwardCache, Gradients, Mlp, Optimizer};

/// Generator and discriminator of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Nets {
    pub generator: Mlp,
    pub discriminator: Mlp,
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Objective,
    Constraint,
}

/// `f(D(z))` and `d f(D(z)) / dz` for the discriminator's output logit `z`.
///
/// Jensen-Shannon behind a sigmoid is written in log-sigmoid form, so both the
/// values and the derivatives stay finite when the sigmoid saturates.
fn head(spec: &Divergence, act: Activation, z: f64, term: Term) -> (f64, f64) {
    if spec.kind == DivergenceKind::JensenShannon && act == Activation::Sigmoid {
        return match term {
            // log σ(z)
            Term::Objective => (-nn::softplus(-z), nn::sigmoid(-z)),
            // log 2 + log(1 - σ(z))
            Term::Constraint => (std::f64::consts::LN_2 - nn::softplus(z), -nn::sigmoid(z)),
        };
    }
    let d = act.apply(z);
    let dd = act.derivative(z);
    match term {
        Term::Objective => (spec.f0(d), spec.f0_deriv(d) * dd),
        Term::Constraint => (spec.f1(d), spec.f1_deriv(d) * dd),
    }
}

fn output_activation(mlp: &Mlp) -> Activation {
    mlp.layers.last().expect("non-empty network").activation
}

fn single_column(mlp: &Mlp) -> Result<()> {
    check_len("discriminator output width", 1, mlp.output_width())
}

/// `f1(D(x))` for every row, computed from the logits.
pub fn constraint_values(disc: &Mlp, spec: &Divergence, points: ArrayView2<f64>) -> Result<Vec<f64>> {
    single_column(disc)?;
    let (_, cache) = disc.forward(points)?;
    let act = output_activation(disc);
    Ok(cache
        .output_pre_activation()
        .iter()
        .map(|&z| head(spec, act, z, Term::Constraint).0)
        .collect())
}

/// Value and parameter gradient of
/// `(1/m1) Σ f0(D(x_i)) + (1/m2) Σ f1(D(G(z_j)))`.
pub fn discriminator_objective(
    disc: &Mlp,
    spec: &Divergence,
    data: ArrayView2<f64>,
    fake: ArrayView2<f64>,
) -> Result<(f64, Gradients)> {
    single_column(disc)?;
    if data.nrows() == 0 || fake.nrows() == 0 {
        return Err(Error::InvalidArgument("empty minibatch".into()));
    }
    let m1 = data.nrows();
    let m2 = fake.nrows();
    let batch = ndarray::concatenate(Axis(0), &[data, fake])
        .map_err(|_| Error::Dimension {
            what: "sample dimension",
            expected: data.ncols(),
            got: fake.ncols(),
        })?;
    let (_, cache) = disc.forward(batch.view())?;
    let act = output_activation(disc);
    let z = cache.output_pre_activation();
    let mut value = 0.0;
    let mut dz = Array2::zeros(z.raw_dim());
    for (row, (&zv, g)) in z.iter().zip(dz.iter_mut()).enumerate() {
        let (term, scale) = if row < m1 {
            (Term::Objective, 1.0 / m1 as f64)
        } else {
            (Term::Constraint, 1.0 / m2 as f64)
        };
        let (f, df) = head(spec, act, zv, term);
        value += scale * f;
        *g = scale * df;
    }
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "discriminator objective",
            t: 0,
        });
    }
    let (grads, _) = disc.backward_from_pre_activation(&cache, dz.view())?;
    Ok((value, grads))
}

/// One gradient-ascent step of the discriminator objective, followed by
/// weight clipping when requested. Returns the objective before the step.
pub fn discriminator_step(
    disc: &mut Mlp,
    opt: &mut Optimizer,
    spec: &Divergence,
    data: ArrayView2<f64>,
    fake: ArrayView2<f64>,
    clip: Option<&ClipSpec>,
) -> Result<f64> {
    let (value, grads) = discriminator_objective(disc, spec, data, fake)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            what: "discriminator gradient",
            t: 0,
        });
    }
    opt.step(disc, &grads, Direction::Ascend)?;
    if let Some(c) = clip {
        nn::clip_params(disc, c);
    }
    Ok(value)
}

/// `p̃_g(x_i) = p̂_g(x_i) - α f1(D(x_i))` from discriminator values `D(x_i)`.
pub fn compute_target_probs(
    data: ArrayView2<f64>,
    samples: ArrayView2<f64>,
    disc_on_data: &[f64],
    spec: &Divergence,
    alpha: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    let f1: Vec<f64> = disc_on_data.iter().map(|&d| spec.f1(d)).collect();
    targets_from_constraints(data, samples, &f1, alpha, sigma)
}

/// Same as [`compute_target_probs`] with `f1(D(x_i))` already evaluated.
pub fn targets_from_constraints(
    data: ArrayView2<f64>,
    samples: ArrayView2<f64>,
    f1_on_data: &[f64],
    alpha: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    check_len("discriminator values", data.nrows(), f1_on_data.len())?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("target step must be >= 0, got {alpha}")));
    }
    let est = kde::estimate_probs(data, samples, sigma)?;
    Ok(est
        .iter()
        .zip(f1_on_data)
        .map(|(p, f)| if alpha == 0.0 { *p } else { p - alpha * f })
        .collect())
}

/// The two parts of the generator loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorLoss {
    /// `(1/m2) Σ f1(D(G(z_j)))`
    pub adversarial: f64,
    /// `(1/m1) Σ (p̃_i - p̂_i)²`; zero when the term is disabled.
    pub penalty: f64,
}

impl GeneratorLoss {
    pub fn total(&self) -> f64 {
        self.adversarial + self.penalty
    }
}

/// Generator-side inputs that stay fixed during one generator update.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorObjective<'a> {
    pub spec: &'a Divergence,
    pub data: ArrayView2<'a, f64>,
    pub targets: &'a [f64],
    pub sigma: f64,
    pub proposed_term: bool,
}

/// Loss and parameter gradient of the generator objective on `noise`.
///
/// The adversarial gradient reaches the generated samples through the
/// discriminator's input gradient; the penalty gradient through the kernel.
pub fn generator_objective(
    nets: &Nets,
    noise: ArrayView2<f64>,
    obj: &GeneratorObjective<'_>,
) -> Result<(GeneratorLoss, Gradients)> {
    let (samples, g_cache) = nets.generator.forward(noise)?;
    generator_objective_from_samples(nets, &samples, &g_cache, obj)
}

fn generator_objective_from_samples(
    nets: &Nets,
    samples: &Array2<f64>,
    g_cache: &ForwardCache,
    obj: &GeneratorObjective<'_>,
) -> Result<(GeneratorLoss, Gradients)> {
    single_column(&nets.discriminator)?;
    let m2 = samples.nrows();
    if m2 == 0 {
        return Err(Error::InvalidArgument("empty noise batch".into()));
    }
    let (_, d_cache) = nets.discriminator.forward(samples.view())?;
    let act = output_activation(&nets.discriminator);
    let z = d_cache.output_pre_activation();
    let mut adversarial = 0.0;
    let mut dz = Array2::zeros(z.raw_dim());
    for (&zv, g) in z.iter().zip(dz.iter_mut()) {
        let (f, df) = head(obj.spec, act, zv, Term::Constraint);
        adversarial += f / m2 as f64;
        *g = df / m2 as f64;
    }
    let (_, mut d_samples) = nets.discriminator.backward_from_pre_activation(&d_cache, dz.view())?;

    let mut penalty = 0.0;
    if obj.proposed_term {
        let (p, grad) = penalty_and_grad(samples.view(), obj.data, obj.targets, obj.sigma)?;
        penalty = p;
        d_samples += &grad;
    }
    let loss = GeneratorLoss {
        adversarial,
        penalty,
    };
    if !loss.total().is_finite() {
        return Err(Error::NonFinite {
            what: "generator loss",
            t: 0,
        });
    }
    let (grads, _) = nets.generator.backward(g_cache, d_samples.view())?;
    Ok((loss, grads))
}

/// `(1/m1) Σ_i (p̃_i - p̂_i)²` and its gradient with respect to each sample.
pub fn penalty_and_grad(
    samples: ArrayView2<f64>,
    data: ArrayView2<f64>,
    targets: &[f64],
    sigma: f64,
) -> Result<(f64, Array2<f64>)> {
    check_len("targets", data.nrows(), targets.len())?;
    check_len("sample dimension", data.ncols(), samples.ncols())?;
    let m1 = data.nrows();
    let m2 = samples.nrows();
    let sigma_sq = sigma * sigma;
    // kernel matrix K[i, j] = k(s_j - x_i)
    let mut k = Array2::<f64>::zeros((m1, m2));
    for (i, x) in data.axis_iter(Axis(0)).enumerate() {
        for (j, s) in samples.axis_iter(Axis(0)).enumerate() {
            let sq: f64 = s.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            k[[i, j]] = (-sq / sigma_sq).exp();
        }
    }
    // summed in the same order as kde::estimate_probs, so a target equal to
    // the estimate leaves an exactly zero residual
    let est: Vec<f64> = k.rows().into_iter().map(|r| r.iter().sum::<f64>() / m2 as f64).collect();
    let resid: Vec<f64> = est.iter().zip(targets).map(|(p, t)| p - t).collect();
    let value = resid.iter().map(|r| r * r).sum::<f64>() / m1 as f64;
    // d/ds_j of (1/m1) Σ_i r_i² = (1/m1) Σ_i 2 r_i (1/m2) k_ij (-2 (s_j - x_i) / σ²)
    let mut grad = Array2::<f64>::zeros(samples.raw_dim());
    let coef = -4.0 / (m1 as f64 * m2 as f64 * sigma_sq);
    for (j, (s, mut g)) in samples
        .axis_iter(Axis(0))
        .zip(grad.axis_iter_mut(Axis(0)))
        .enumerate()
    {
        for (i, x) in data.axis_iter(Axis(0)).enumerate() {
            let w = coef * resid[i] * k[[i, j]];
            if w != 0.0 {
                for ((gd, sd), xd) in g.iter_mut().zip(s.iter()).zip(x.iter()) {
                    *gd += w * (sd - xd);
                }
            }
        }
    }
    Ok((value, grad))
}

/// One gradient-descent step of the generator. Returns the loss before the
/// step.
pub fn generator_step(
    nets: &mut Nets,
    opt: &mut Optimizer,
    noise: ArrayView2<f64>,
    obj: &GeneratorObjective<'_>,
) -> Result<GeneratorLoss> {
    let (loss, grads) = generator_objective(nets, noise, obj)?;
    if !grads.is_finite() {
        return Err(Error::NonFinite {
            what: "generator gradient",
            t: 0,
        });
    }
    opt.step(&mut nets.generator, &grads, Direction::Descend)?;
    Ok(loss)
}

/// Fits the generator to the constant `target` by least squares on fresh
/// noise batches. Returns the last batch's mean squared error.
pub fn pretrain_generator<R, F>(
    generator: &mut Mlp,
    target: &[f64],
    steps: usize,
    opt: &mut Optimizer,
    batch: usize,
    mut sample_noise: F,
    rng: &mut R,
) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(usize, &mut R) -> Array2<f64>,
{
    check_len("pretraining target", generator.output_width(), target.len())?;
    let mut mse = f64::NAN;
    for _ in 0..steps {
        let noise = sample_noise(batch, rng);
        let (out, cache) = generator.forward(noise.view())?;
        let mut resid = out;
        for mut row in resid.axis_iter_mut(Axis(0)) {
            for (v, t) in row.iter_mut().zip(target) {
                *v -= t;
            }
        }
        let n = resid.nrows() as f64;
        mse = resid.iter().map(|r| r * r).sum::<f64>() / n;
        let grad = resid.mapv(|r| 2.0 * r / n);
        let (g, _) = generator.backward(&cache, grad.view())?;
        opt.step(generator, &g, Direction::Descend)?;
    }
    Ok(mse)
}

/// A 1-D sigmoid discriminator whose logit is exactly `-level` on
/// `(-∞, δ]` and exactly `+level` on `[1 - δ, ∞)`, linear in between.
pub fn locally_constant_discriminator(delta: f64, level: f64) -> Result<Mlp> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    let slope = 2.0 * level / (1.0 - 2.0 * delta);
    Mlp::from_layers(vec![
        nn::Dense {
            weights: ndarray::array![[1.0, 1.0]],
            bias: ndarray::array![-delta, -(1.0 - delta)],
            activation: Activation::Relu,
        },
        nn::Dense {
            weights: ndarray::array![[slope], [-slope]],
            bias: ndarray::array![-level],
            activation: Activation::Sigmoid,
        },
    ])
}
