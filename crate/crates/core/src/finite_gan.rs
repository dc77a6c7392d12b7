//! GAN training over a finite alphabet, carried out directly on the function
//! values: the discriminator outputs `D_i = D(x_i)` are the primal variables
//! and the generated masses `p_g(x_i)` the duals of the per-point constraints
//! `f1(D_i) >= 0`. The Lagrangian is
//!
//! ```text
//! L(D, p_g) = Σ_i p_d(x_i) f0(D_i) + Σ_i p_g(x_i) f1(D_i)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::Divergence;
use crate::error::{check_len, Error, Result};
use crate::saddle::{self, SaddleIterate, SaddleProblem, SolveMode, SolveOptions, StepSchedule};

/// Nonnegative masses on `{x_1, ..., x_n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    probs: Vec<f64>,
}

impl DistributionVector {
    /// Accepts any nonnegative finite masses.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty alphabet".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "masses must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { probs })
    }

    /// Accepts masses that already sum to one (within `1e-12`).
    pub fn normalized(probs: Vec<f64>) -> Result<Self> {
        let v = Self::new(probs)?;
        if !v.is_normalized() {
            return Err(Error::InvalidArgument(format!(
                "masses sum to {}, expected 1",
                v.total()
            )));
        }
        Ok(v)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty alphabet".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Normalized i.i.d. uniform weights, bounded away from zero.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty alphabet".into()));
        }
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        Ok(Self {
            probs: w.into_iter().map(|x| x / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }
}

/// Discriminator values and generated masses on the alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGanState {
    pub d: Vec<f64>,
    pub p_g: Vec<f64>,
}

impl FiniteGanState {
    /// Every `D_i` starts at `init_d`; `p_g` is uniform.
    pub fn uniform(n: usize, init_d: f64) -> Self {
        Self {
            d: vec![init_d; n],
            p_g: vec![1.0 / n as f64; n],
        }
    }

    /// Total variation distance `½ Σ |p_g - p_d|`.
    pub fn tv_distance(&self, p_d: &DistributionVector) -> f64 {
        0.5 * self
            .p_g
            .iter()
            .zip(p_d.probs())
            .map(|(g, d)| (g - d).abs())
            .sum::<f64>()
    }

    pub fn max_mass_error(&self, p_d: &DistributionVector) -> f64 {
        self.p_g
            .iter()
            .zip(p_d.probs())
            .map(|(g, d)| (g - d).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i |D_i - D*_i|` over the support of `p_d`, where `D*_i` is the
    /// saddle discriminator (`p_g = p_d`).
    pub fn max_discriminator_error(&self, p_d: &DistributionVector, spec: &Divergence) -> f64 {
        self.d
            .iter()
            .zip(p_d.probs())
            .filter(|(_, &p)| p > 0.0)
            .map(|(d, &p)| (d - spec.saddle_discriminator(p)).abs())
            .fold(0.0, f64::max)
    }
}

fn check_state(state: &FiniteGanState, p_d: &DistributionVector, spec: &Divergence) -> Result<()> {
    let n = p_d.alphabet_size();
    check_len("discriminator vector", n, state.d.len())?;
    check_len("generated masses", n, state.p_g.len())?;
    if let Some(&bad) = state.d.iter().find(|d| !spec.domain.contains(**d)) {
        return Err(Error::OutsideDomain {
            value: bad,
            lo: spec.domain.lo,
            hi: spec.domain.hi,
        });
    }
    Ok(())
}

/// `Σ_i p_d,i f0(D_i) + Σ_i p_g,i f1(D_i)`.
pub fn gan_lagrangian(
    state: &FiniteGanState,
    p_d: &DistributionVector,
    spec: &Divergence,
) -> Result<f64> {
    check_state(state, p_d, spec)?;
    Ok(state
        .d
        .iter()
        .zip(p_d.probs())
        .zip(&state.p_g)
        .map(|((&d, &pd), &pg)| weighted(pd, spec.f0(d)) + weighted(pg, spec.f1(d)))
        .sum())
}

// 0 · (-∞) counts as 0: a point without mass contributes nothing
fn weighted(mass: f64, value: f64) -> f64 {
    if mass == 0.0 {
        0.0
    } else {
        mass * value
    }
}

/// `∂L/∂D_i = p_d,i f0'(D_i) + p_g,i f1'(D_i)`.
pub fn grad_d(state: &FiniteGanState, p_d: &DistributionVector, spec: &Divergence) -> Result<Vec<f64>> {
    check_state(state, p_d, spec)?;
    Ok(grad_d_unchecked(&state.d, p_d.probs(), &state.p_g, spec))
}

fn grad_d_unchecked(d: &[f64], p_d: &[f64], p_g: &[f64], spec: &Divergence) -> Vec<f64> {
    d.iter()
        .zip(p_d)
        .zip(p_g)
        .map(|((&d, &pd), &pg)| weighted(pd, spec.f0_deriv(d)) + weighted(pg, spec.f1_deriv(d)))
        .collect()
}

/// `∂L/∂p_g,i = f1(D_i)`.
pub fn grad_pg(state: &FiniteGanState, spec: &Divergence) -> Result<Vec<f64>> {
    if let Some(&bad) = state.d.iter().find(|d| !spec.domain.contains(**d)) {
        return Err(Error::OutsideDomain {
            value: bad,
            lo: spec.domain.lo,
            hi: spec.domain.hi,
        });
    }
    Ok(state.d.iter().map(|&d| spec.f1(d)).collect())
}

/// The finite GAN as a [`SaddleProblem`]: `x = D`, `λ = p_g`, `X` the
/// divergence's domain box.
#[derive(Debug, Clone)]
pub struct FiniteGanProblem {
    pub p_d: DistributionVector,
    pub spec: Divergence,
}

impl SaddleProblem for FiniteGanProblem {
    fn primal_dim(&self) -> usize {
        self.p_d.alphabet_size()
    }

    fn constraint_count(&self) -> usize {
        self.p_d.alphabet_size()
    }

    fn objective_value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.p_d.probs())
            .map(|(&d, &pd)| weighted(pd, self.spec.f0(d)))
            .sum()
    }

    fn objective_subgrad(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.p_d.probs())
            .map(|(&d, &pd)| weighted(pd, self.spec.f0_deriv(d)))
            .collect()
    }

    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&d| self.spec.f1(d)).collect()
    }

    fn constraint_subgrads(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut row = vec![0.0; n];
                row[i] = self.spec.f1_deriv(x[i]);
                row
            })
            .collect()
    }

    fn project_primal(&self, x: &mut [f64]) {
        for v in x {
            *v = self.spec.domain.clamp(*v);
        }
    }

    fn closed_form_primal_argmax(&self, lambda: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.p_d
                .probs()
                .iter()
                .zip(lambda)
                .map(|(&pd, &pg)| self.spec.optimal_discriminator(pd, pg).value)
                .collect(),
        )
    }

    fn lagrangian_subgrad(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        grad_d_unchecked(x, self.p_d.probs(), lambda, &self.spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteGanOptions {
    pub mode: SolveMode,
    pub schedule: StepSchedule,
    pub max_iters: usize,
    pub tol: f64,
    /// `None` means `max(1, max_iters / 1000)`.
    pub stride: Option<usize>,
    /// Rescale `p_g` onto the simplex after every dual step. Off by default:
    /// the dual update only projects onto the nonnegative orthant.
    pub simplex_projection: bool,
}

impl FiniteGanOptions {
    /// Harmonic steps `100 / (1000 + t)`: nearly constant `0.1` for the first
    /// thousand iterations, with enough total step length that alphabets with
    /// masses near `10⁻³` still converge within `10⁶` iterations.
    pub fn new(mode: SolveMode, max_iters: usize) -> Self {
        Self {
            mode,
            schedule: StepSchedule::Harmonic { a: 100.0, b: 1000.0 },
            max_iters,
            tol: 1e-12,
            stride: None,
            simplex_projection: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGanRun {
    pub samples: Vec<(usize, FiniteGanState)>,
    pub final_state: FiniteGanState,
    pub max_subgrad_norm: f64,
    pub iterations: usize,
}

/// Trains the function-space GAN from `init` with the saddle solver.
pub fn train_function_space(
    p_d: &DistributionVector,
    spec: &Divergence,
    init: FiniteGanState,
    opts: &FiniteGanOptions,
) -> Result<FiniteGanRun> {
    check_len("discriminator vector", p_d.alphabet_size(), init.d.len())?;
    check_len("generated masses", p_d.alphabet_size(), init.p_g.len())?;
    let problem = FiniteGanProblem {
        p_d: p_d.clone(),
        spec: *spec,
    };
    let start = SaddleIterate::new(init.d, init.p_g);
    let mut solve_opts = SolveOptions::new(opts.max_iters, opts.tol);
    solve_opts.stride = opts.stride;

    let report = if opts.simplex_projection {
        solve_with_simplex(&problem, start, opts, &solve_opts)?
    } else {
        saddle::solve(&problem, start, &opts.schedule, opts.mode, &solve_opts)?
    };
    let samples = report
        .trajectory
        .iter()
        .map(|p| {
            (
                p.t,
                FiniteGanState {
                    d: p.x.clone(),
                    p_g: p.lambda.clone(),
                },
            )
        })
        .collect();
    Ok(FiniteGanRun {
        samples,
        final_state: FiniteGanState {
            d: report.final_iterate.x,
            p_g: report.final_iterate.lambda,
        },
        max_subgrad_norm: report.max_subgrad_norm,
        iterations: report.final_iterate.t,
    })
}

fn solve_with_simplex(
    problem: &FiniteGanProblem,
    mut it: SaddleIterate,
    opts: &FiniteGanOptions,
    solve_opts: &SolveOptions,
) -> Result<saddle::SolveReport> {
    let stride = solve_opts.effective_stride();
    let mut trajectory = Vec::new();
    let mut max_norm = 0.0_f64;
    let record = |it: &SaddleIterate| saddle::TrajectoryPoint {
        t: it.t,
        x: it.x.clone(),
        lambda: it.lambda.clone(),
        lagrangian: saddle::lagrangian_value(problem, &it.x, &it.lambda).unwrap_or(f64::NAN),
    };
    problem.project_primal(&mut it.x);
    project_simplex(&mut it.lambda);
    trajectory.push(record(&it));
    for _ in 0..opts.max_iters {
        let g = problem.lagrangian_subgrad(&it.x, &it.lambda);
        let f = problem.constraint_values(&it.x);
        let n2: f64 = g.iter().chain(&f).map(|v| v * v).sum();
        if n2.is_finite() {
            max_norm = max_norm.max(n2.sqrt());
        }
        it = match opts.mode {
            SolveMode::PrimalDual => saddle::primal_dual_step(problem, &it, &opts.schedule)?,
            SolveMode::DualDriven => {
                saddle::dual_driven_step(problem, &it, &opts.schedule, &solve_opts.inner)?
            }
        };
        project_simplex(&mut it.lambda);
        if it.t.is_multiple_of(stride) {
            trajectory.push(record(&it));
        }
    }
    if trajectory.last().map(|p| p.t) != Some(it.t) {
        trajectory.push(record(&it));
    }
    Ok(saddle::SolveReport {
        final_iterate: it,
        trajectory,
        max_subgrad_norm: max_norm,
        stop: saddle::StopReason::MaxIters,
    })
}

/// Euclidean projection onto `{p >= 0, Σp = 1}` (sort-and-threshold).
pub fn project_simplex(p: &mut [f64]) {
    if p.is_empty() {
        return;
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for v in p.iter_mut() {
        *v = (*v - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::DivergenceKind;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn js() -> Divergence {
        Divergence::new(DivergenceKind::JensenShannon)
    }

    fn state(d: Vec<f64>, p_g: Vec<f64>) -> FiniteGanState {
        FiniteGanState { d, p_g }
    }

    #[test]
    fn lagrangian_examples() {
        let one = DistributionVector::new(vec![1.0]).unwrap();
        let v = gan_lagrangian(&state(vec![0.5], vec![1.0]), &one, &js()).unwrap();
        assert_abs_diff_eq!(v, -std::f64::consts::LN_2, epsilon = 1e-15);

        let pd = DistributionVector::new(vec![1.0, 0.0]).unwrap();
        let v = gan_lagrangian(&state(vec![0.9, 0.1], vec![0.0, 1.0]), &pd, &js()).unwrap();
        assert_abs_diff_eq!(v, 0.9f64.ln() + 1.8f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.4824, epsilon = 1e-4);

        let q = Divergence::new(DivergenceKind::QuadraticOther);
        assert_eq!(gan_lagrangian(&state(vec![2.0], vec![1.0]), &one, &q).unwrap(), 0.0);
    }

    #[test]
    fn lagrangian_rejects_out_of_box() {
        let one = DistributionVector::new(vec![1.0]).unwrap();
        let err = gan_lagrangian(&state(vec![0.99], vec![1.0]), &one, &js()).unwrap_err();
        assert!(matches!(err, Error::OutsideDomain { .. }));
        let err = gan_lagrangian(&state(vec![0.5, 0.5], vec![1.0]), &one, &js()).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn gradient_identities() {
        let pd = DistributionVector::new(vec![0.7]).unwrap();
        let g = grad_d(&state(vec![0.5], vec![0.3]), &pd, &js()).unwrap();
        assert_abs_diff_eq!(g[0], 0.8, epsilon = 1e-15);
        let g = grad_d(&state(vec![0.5], vec![0.7]), &pd, &js()).unwrap();
        assert_eq!(g[0], 0.0);

        assert_eq!(grad_pg(&state(vec![0.5], vec![0.0]), &js()).unwrap(), vec![0.0]);
        let up = grad_pg(&state(vec![0.95], vec![0.0]), &js()).unwrap()[0];
        assert_abs_diff_eq!(up, 0.1f64.ln(), epsilon = 1e-12);
        let kl = Divergence::new(DivergenceKind::Kl);
        assert_eq!(grad_pg(&state(vec![1.0], vec![0.0]), &kl).unwrap(), vec![0.0]);
    }

    #[test]
    fn single_atom_is_stationary_from_the_start() {
        let pd = DistributionVector::normalized(vec![1.0]).unwrap();
        let opts = FiniteGanOptions::new(SolveMode::PrimalDual, 50);
        let run = train_function_space(&pd, &js(), state(vec![0.5], vec![1.0]), &opts).unwrap();
        for (_, s) in &run.samples {
            assert_eq!(s.d, vec![0.5]);
            assert_eq!(s.p_g, vec![1.0]);
        }
    }

    #[test]
    fn disjoint_start_recovers_the_data_atom() {
        let pd = DistributionVector::normalized(vec![0.0, 1.0]).unwrap();
        for mode in [SolveMode::DualDriven, SolveMode::PrimalDual] {
            let opts = FiniteGanOptions::new(mode, 200_000);
            let run =
                train_function_space(&pd, &js(), state(vec![0.5, 0.5], vec![1.0, 0.0]), &opts)
                    .unwrap();
            let s = &run.final_state;
            assert!(s.max_mass_error(&pd) < 1e-2, "{mode}: {:?}", s.p_g);
            assert!(s.max_discriminator_error(&pd, &js()) < 1e-2, "{mode}: {:?}", s.d);
        }
    }

    #[test]
    fn simplex_projection_keeps_masses_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pd = DistributionVector::random(5, &mut rng).unwrap();
        let mut opts = FiniteGanOptions::new(SolveMode::DualDriven, 20_000);
        opts.simplex_projection = true;
        let run = train_function_space(&pd, &js(), FiniteGanState::uniform(5, 0.5), &opts).unwrap();
        for (_, s) in &run.samples {
            assert_abs_diff_eq!(s.p_g.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(run.final_state.max_mass_error(&pd) < 1e-2);
    }

    #[test]
    fn simplex_projection_examples() {
        let mut p = vec![0.5, 0.5];
        project_simplex(&mut p);
        assert_eq!(p, vec![0.5, 0.5]);
        let mut p = vec![2.0, 0.0];
        project_simplex(&mut p);
        assert_eq!(p, vec![1.0, 0.0]);
        let mut p = vec![0.2, 0.2, 0.2];
        project_simplex(&mut p);
        for v in p {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(DistributionVector::new(vec![]).is_err());
        assert!(DistributionVector::new(vec![-0.1, 1.1]).is_err());
        assert!(DistributionVector::normalized(vec![0.3, 0.3]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = DistributionVector::random(50, &mut rng).unwrap();
        assert!(r.is_normalized());
        assert!(r.probs().iter().all(|p| *p > 0.0));
    }
}
