//! Finite-difference oracles shared by the gradient tests and the acceptance
//! suite.

#![allow(dead_code)]

use dualgan::divergence::{Divergence, DivergenceKind};
use dualgan::finite_gan::{gan_lagrangian, grad_d, grad_pg, DistributionVector, FiniteGanState};
use dualgan::nn::{Activation, Mlp};
use dualgan::trainer::{
    discriminator_objective, generator_objective, targets_from_constraints, constraint_values,
    GeneratorObjective, Nets,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-6;
/// Below this magnitude a component is compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Largest relative error between `analytic` and central differences of `f`
/// at `x`.
pub fn fd_max_rel_err(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = FD_STEP * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max(rel_err(fd, analytic[i]));
    }
    worst
}

pub fn normal_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn random_mlp(rng: &mut ChaCha8Rng, input: usize, output: Activation, out_width: usize) -> Mlp {
    let hidden = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
    let h1 = hidden[rng.random_range(0..3)];
    let h2 = hidden[rng.random_range(0..3)];
    let w1 = rng.random_range(3..9);
    let w2 = rng.random_range(3..9);
    let mut mlp = Mlp::new(input, &[(w1, h1), (w2, h2), (out_width, output)], rng).unwrap();
    // nonzero biases so that every code path is exercised
    for l in &mut mlp.layers {
        for b in l.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    mlp
}

/// MLP backward pass against finite differences of `Σ W ⊙ output`.
pub fn mlp_backward_errors(instances: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let outs = [Activation::Relu, Activation::Sigmoid, Activation::Linear];
    (0..instances)
        .map(|k| {
            let input = rng.random_range(1..5);
            let out_w = rng.random_range(1..4);
            let mlp = random_mlp(&mut rng, input, outs[k % 3], out_w);
            let batch = normal_matrix(rng.random_range(1..7), input, 1.0, &mut rng);
            let weights = normal_matrix(batch.nrows(), out_w, 1.0, &mut rng);
            let loss = |p: &[f64]| {
                let mut m = mlp.clone();
                m.set_flat_params(p).unwrap();
                (m.predict(batch.view()).unwrap() * &weights).sum()
            };
            let (_, cache) = mlp.forward(batch.view()).unwrap();
            let (g, dx) = mlp.backward(&cache, weights.view()).unwrap();
            let params = fd_max_rel_err(loss, &mlp.flat_params(), &g.flat());
            let input_loss = |x: &[f64]| {
                let b = Array2::from_shape_vec(batch.dim(), x.to_vec()).unwrap();
                (mlp.predict(b.view()).unwrap() * &weights).sum()
            };
            let inputs = fd_max_rel_err(
                input_loss,
                batch.as_standard_layout().as_slice().unwrap(),
                dx.as_standard_layout().as_slice().unwrap(),
            );
            params.max(inputs)
        })
        .collect()
}

fn random_nets(rng: &mut ChaCha8Rng, noise: usize, dim: usize, disc_out: Activation) -> Nets {
    let generator = Mlp::new(
        noise,
        &[(rng.random_range(4..10), Activation::Relu), (dim, Activation::Linear)],
        rng,
    )
    .unwrap();
    let mut discriminator = Mlp::new(
        dim,
        &[(rng.random_range(4..10), Activation::Relu), (1, disc_out)],
        rng,
    )
    .unwrap();
    for b in discriminator.layers[0].bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    Nets {
        generator,
        discriminator,
    }
}

/// Discriminator objective gradient with respect to its parameters.
pub fn discriminator_loss_errors(instances: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let variants = [
        (DivergenceKind::JensenShannon, Activation::Sigmoid),
        (DivergenceKind::ApproxWgan, Activation::Linear),
        (DivergenceKind::Kl, Activation::Sigmoid),
        (DivergenceKind::QuadraticOther, Activation::Linear),
    ];
    (0..instances)
        .map(|k| {
            let (kind, act) = variants[k % variants.len()];
            let spec = Divergence::new(kind);
            let dim = 1 + k % 2;
            let nets = random_nets(&mut rng, 3, dim, act);
            let data = normal_matrix(rng.random_range(2..8), dim, 1.0, &mut rng);
            let fake = normal_matrix(rng.random_range(2..8), dim, 1.0, &mut rng);
            let (_, g) = discriminator_objective(&nets.discriminator, &spec, data.view(), fake.view()).unwrap();
            let loss = |p: &[f64]| {
                let mut d = nets.discriminator.clone();
                d.set_flat_params(p).unwrap();
                discriminator_objective(&d, &spec, data.view(), fake.view()).unwrap().0
            };
            fd_max_rel_err(loss, &nets.discriminator.flat_params(), &g.flat())
        })
        .collect()
}

/// Full generator loss (adversarial term plus kernel penalty) with respect
/// to the generator parameters.
pub fn generator_loss_errors(instances: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    (0..instances)
        .map(|k| {
            let spec = Divergence::new(DivergenceKind::JensenShannon);
            let dim = 1 + k % 2;
            let noise_dim = 2 + k % 3;
            let nets = random_nets(&mut rng, noise_dim, dim, Activation::Sigmoid);
            let data = normal_matrix(rng.random_range(2..8), dim, 0.7, &mut rng);
            let noise = normal_matrix(rng.random_range(2..8), noise_dim, 1.0, &mut rng);
            let sigma = rng.random_range(0.4..1.2);
            let samples = nets.generator.predict(noise.view()).unwrap();
            let f1 = constraint_values(&nets.discriminator, &spec, data.view()).unwrap();
            let targets = targets_from_constraints(data.view(), samples.view(), &f1, 0.1, sigma).unwrap();
            let obj = GeneratorObjective {
                spec: &spec,
                data: data.view(),
                targets: &targets,
                sigma,
                proposed_term: true,
            };
            let (_, g) = generator_objective(&nets, noise.view(), &obj).unwrap();
            let loss = |p: &[f64]| {
                let mut n = nets.clone();
                n.generator.set_flat_params(p).unwrap();
                generator_objective(&n, noise.view(), &obj).unwrap().0.total()
            };
            fd_max_rel_err(loss, &nets.generator.flat_params(), &g.flat())
        })
        .collect()
}

/// `grad_d` and `grad_pg` of the finite Lagrangian, every divergence row.
pub fn lagrangian_errors(instances_per_row: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut out = Vec::new();
    for kind in DivergenceKind::ALL {
        let spec = Divergence::new(kind);
        for _ in 0..instances_per_row {
            let n = rng.random_range(2..8);
            let p_d = DistributionVector::random(n, &mut rng).unwrap();
            let p_g: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
            // interior points where every row is smooth
            let lo = spec.domain.lo.max(0.1);
            let hi = spec.domain.hi.min(5.0);
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
            let state = FiniteGanState { d, p_g };
            let gd = grad_d(&state, &p_d, &spec).unwrap();
            let gp = grad_pg(&state, &spec).unwrap();
            let by_d = |x: &[f64]| {
                let s = FiniteGanState {
                    d: x.to_vec(),
                    p_g: state.p_g.clone(),
                };
                gan_lagrangian(&s, &p_d, &spec).unwrap()
            };
            let by_pg = |x: &[f64]| {
                let s = FiniteGanState {
                    d: state.d.clone(),
                    p_g: x.to_vec(),
                };
                gan_lagrangian(&s, &p_d, &spec).unwrap()
            };
            out.push(fd_max_rel_err(by_d, &state.d, &gd).max(fd_max_rel_err(by_pg, &state.p_g, &gp)));
        }
    }
    out
}
