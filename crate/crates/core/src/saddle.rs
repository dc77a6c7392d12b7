//! Dual-driven and primal-dual-driven subgradient solvers for
//!
//! ```text
//! maximize f0(x)  subject to  f_i(x) >= 0 (i = 1..l),  x in X
//! ```
//!
//! through the Lagrangian `L(x, λ) = f0(x) + Σ λ_i f_i(x)` with `λ >= 0`.
//! Both solvers take a projected subgradient step on `λ`; they differ in how
//! the primal variable moves. All steps are pure functions of the problem,
//! the current iterate and the step schedule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A constrained concave maximization instance.
///
/// `f0` and every `f_i` must be concave and `X` convex; `project_primal` is
/// the Euclidean projection onto `X`.
pub trait SaddleProblem {
    fn primal_dim(&self) -> usize;
    fn constraint_count(&self) -> usize;
    fn objective_value(&self, x: &[f64]) -> f64;
    fn objective_subgrad(&self, x: &[f64]) -> Vec<f64>;
    /// `F(x) = (f_1(x), ..., f_l(x))`.
    fn constraint_values(&self, x: &[f64]) -> Vec<f64>;
    /// Row `i` is a subgradient of `f_i` at `x` (an `l × k` matrix).
    fn constraint_subgrads(&self, x: &[f64]) -> Vec<Vec<f64>>;
    fn project_primal(&self, x: &mut [f64]);

    /// `argmax_{x in X} L(x, λ)` when it has a closed form.
    fn closed_form_primal_argmax(&self, _lambda: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// `∂_x L(x, λ)`. Problems with separable structure should override this;
    /// the default assembles the dense constraint Jacobian.
    fn lagrangian_subgrad(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut g = self.objective_subgrad(x);
        for (row, &l) in self.constraint_subgrads(x).iter().zip(lambda) {
            if l != 0.0 {
                for (gj, rj) in g.iter_mut().zip(row) {
                    *gj += l * rj;
                }
            }
        }
        g
    }
}

/// Hides a problem's closed-form primal maximizer so the dual-driven solver
/// falls back to inner projected gradient ascent.
pub struct WithoutClosedForm<'a, P: ?Sized>(pub &'a P);

impl<P: SaddleProblem + ?Sized> SaddleProblem for WithoutClosedForm<'_, P> {
    fn primal_dim(&self) -> usize {
        self.0.primal_dim()
    }
    fn constraint_count(&self) -> usize {
        self.0.constraint_count()
    }
    fn objective_value(&self, x: &[f64]) -> f64 {
        self.0.objective_value(x)
    }
    fn objective_subgrad(&self, x: &[f64]) -> Vec<f64> {
        self.0.objective_subgrad(x)
    }
    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.0.constraint_values(x)
    }
    fn constraint_subgrads(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.0.constraint_subgrads(x)
    }
    fn project_primal(&self, x: &mut [f64]) {
        self.0.project_primal(x)
    }
    fn lagrangian_subgrad(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        self.0.lagrangian_subgrad(x, lambda)
    }
}

/// Step sizes `α(t)`.
///
/// The harmonic schedule `a / (b + t)` satisfies `α > 0`, `Σα = ∞` and
/// `Σα² < ∞` for any `a > 0`, `b >= 0`, which is what the convergence argument
/// for both solvers needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Harmonic { a: f64, b: f64 },
    Constant { value: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Harmonic { a: 1.0, b: 10.0 }
    }
}

impl StepSchedule {
    pub fn harmonic(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "harmonic schedule needs a > 0 and b >= 0, got a={a}, b={b}"
            )));
        }
        Ok(StepSchedule::Harmonic { a, b })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "constant step must be positive, got {value}"
            )));
        }
        Ok(StepSchedule::Constant { value })
    }

    /// Step used to go from iteration `t` to `t + 1`.
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic { a, b } => {
                let denom = b + t as f64;
                // b = 0 would divide by zero on the very first step
                a / denom.max(1.0)
            }
            StepSchedule::Constant { value } => value,
        }
    }

    /// Whether the schedule meets the summability conditions (diverging sum,
    /// converging sum of squares). Constant steps do not.
    pub fn is_summable(&self) -> bool {
        matches!(*self, StepSchedule::Harmonic { a, b } if a > 0.0 && b >= 0.0)
    }
}

/// Primal/dual pair together with the iteration counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleIterate {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub t: usize,
}

impl SaddleIterate {
    pub fn new(x: Vec<f64>, lambda: Vec<f64>) -> Self {
        Self { x, lambda, t: 0 }
    }

    /// Projected origin for the primal, zero duals.
    pub fn origin<P: SaddleProblem + ?Sized>(problem: &P) -> Self {
        let mut x = vec![0.0; problem.primal_dim()];
        problem.project_primal(&mut x);
        Self::new(x, vec![0.0; problem.constraint_count()])
    }

    fn check<P: SaddleProblem + ?Sized>(&self, problem: &P) -> Result<()> {
        check_len("primal vector", problem.primal_dim(), self.x.len())?;
        check_len("dual vector", problem.constraint_count(), self.lambda.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    /// Exact primal maximization, then a dual subgradient step.
    DualDriven,
    /// One projected subgradient step in each of the primal and dual.
    PrimalDual,
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual-driven" | "dual_driven" | "dual" => Ok(SolveMode::DualDriven),
            "primal-dual" | "primal_dual" => Ok(SolveMode::PrimalDual),
            _ => Err(Error::UnknownName {
                kind: "solver mode",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for SolveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveMode::DualDriven => "dual-driven",
            SolveMode::PrimalDual => "primal-dual",
        })
    }
}

/// Inner projected gradient ascent used by the dual-driven solver when the
/// problem has no closed-form primal maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerAscent {
    pub max_steps: usize,
    pub step_size: f64,
    /// Stop once successive Lagrangian values differ by less than this.
    pub tol: f64,
}

impl Default for InnerAscent {
    fn default() -> Self {
        Self {
            max_steps: 1000,
            step_size: 0.1,
            tol: 1e-10,
        }
    }
}

/// `L(x, λ) = f0(x) + Σ λ_i f_i(x)`.
pub fn lagrangian_value<P: SaddleProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    lambda: &[f64],
) -> Result<f64> {
    check_len("primal vector", problem.primal_dim(), x.len())?;
    check_len("dual vector", problem.constraint_count(), lambda.len())?;
    if let Some(bad) = lambda.iter().find(|l| !(**l >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "dual variables must be nonnegative, found {bad}"
        )));
    }
    Ok(lagrangian_unchecked(problem, x, lambda))
}

fn lagrangian_unchecked<P: SaddleProblem + ?Sized>(problem: &P, x: &[f64], lambda: &[f64]) -> f64 {
    let f = problem.constraint_values(x);
    problem.objective_value(x) + lambda.iter().zip(&f).map(|(l, fi)| l * fi).sum::<f64>()
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `λ' = [λ - α F(x)]_+`
fn dual_update(lambda: &[f64], f: &[f64], alpha: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(f)
        .map(|(l, fi)| (l - alpha * fi).max(0.0))
        .collect()
}

/// One primal-dual-driven step:
/// `x' = P_X[x + α ∂_x L(x, λ)]`, `λ' = [λ - α F(x)]_+`.
pub fn primal_dual_step<P: SaddleProblem + ?Sized>(
    problem: &P,
    it: &SaddleIterate,
    sched: &StepSchedule,
) -> Result<SaddleIterate> {
    it.check(problem)?;
    let grad = problem.lagrangian_subgrad(&it.x, &it.lambda);
    let f = problem.constraint_values(&it.x);
    step_from_parts(problem, it, sched, &grad, &f)
}

fn step_from_parts<P: SaddleProblem + ?Sized>(
    problem: &P,
    it: &SaddleIterate,
    sched: &StepSchedule,
    grad: &[f64],
    f: &[f64],
) -> Result<SaddleIterate> {
    if !all_finite(grad) {
        return Err(Error::NonFinite {
            what: "primal subgradient",
            t: it.t,
        });
    }
    if !all_finite(f) {
        return Err(Error::NonFinite {
            what: "constraint values",
            t: it.t,
        });
    }
    let alpha = sched.at(it.t);
    let mut x: Vec<f64> = it.x.iter().zip(grad).map(|(xi, gi)| xi + alpha * gi).collect();
    problem.project_primal(&mut x);
    Ok(SaddleIterate {
        x,
        lambda: dual_update(&it.lambda, f, alpha),
        t: it.t + 1,
    })
}

/// Maximizes `L(·, λ)` over `X` from `start` by projected gradient ascent.
pub fn maximize_primal<P: SaddleProblem + ?Sized>(
    problem: &P,
    start: &[f64],
    lambda: &[f64],
    inner: &InnerAscent,
    t: usize,
) -> Result<Vec<f64>> {
    let mut x = start.to_vec();
    problem.project_primal(&mut x);
    let mut value = lagrangian_unchecked(problem, &x, lambda);
    for _ in 0..inner.max_steps {
        let g = problem.lagrangian_subgrad(&x, lambda);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += inner.step_size * gi;
        }
        problem.project_primal(&mut x);
        let next = lagrangian_unchecked(problem, &x, lambda);
        if !next.is_finite() || !all_finite(&x) {
            return Err(Error::NonFinite {
                what: "inner primal ascent",
                t,
            });
        }
        let done = (next - value).abs() < inner.tol;
        value = next;
        if done {
            break;
        }
    }
    Ok(x)
}

/// One dual-driven step: `x' = argmax_{x in X} L(x, λ)` (closed form when the
/// problem provides one), then the dual update evaluated at `x'`.
///
/// The dual step uses the maximizer for the current `λ`, so the constraint
/// values that drive it are `F(x')`.
pub fn dual_driven_step<P: SaddleProblem + ?Sized>(
    problem: &P,
    it: &SaddleIterate,
    sched: &StepSchedule,
    inner: &InnerAscent,
) -> Result<SaddleIterate> {
    it.check(problem)?;
    let x = match problem.closed_form_primal_argmax(&it.lambda) {
        Some(x) => x,
        None => maximize_primal(problem, &it.x, &it.lambda, inner, it.t)?,
    };
    check_len("primal argmax", problem.primal_dim(), x.len())?;
    if !all_finite(&x) {
        return Err(Error::NonFinite {
            what: "primal argmax",
            t: it.t,
        });
    }
    let f = problem.constraint_values(&x);
    if !all_finite(&f) {
        return Err(Error::NonFinite {
            what: "constraint values",
            t: it.t,
        });
    }
    let alpha = sched.at(it.t);
    Ok(SaddleIterate {
        lambda: dual_update(&it.lambda, &f, alpha),
        x,
        t: it.t + 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lagrangian: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopReason {
    /// Primal and dual movement stayed below `tol` for the required number of
    /// consecutive iterations, ending at iteration `t`.
    Stalled { t: usize },
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub final_iterate: SaddleIterate,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Largest `‖(∂_x L, F)‖₂` observed over all iterations.
    pub max_subgrad_norm: f64,
    pub stop: StopReason,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        matches!(self.stop, StopReason::Stalled { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Movement tolerance for the stopping rule.
    pub tol: f64,
    /// Consecutive sub-tolerance iterations needed to stop.
    pub patience: usize,
    /// Trajectory sampling stride; `None` means `max(1, max_iters / 1000)`.
    pub stride: Option<usize>,
    pub inner: InnerAscent,
}

impl SolveOptions {
    pub fn new(max_iters: usize, tol: f64) -> Self {
        Self {
            max_iters,
            tol,
            patience: 100,
            stride: None,
            inner: InnerAscent::default(),
        }
    }

    pub fn effective_stride(&self) -> usize {
        self.stride.unwrap_or((self.max_iters / 1000).max(1)).max(1)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Runs the chosen solver from `start` until the iteration budget is spent or
/// the iterate stops moving.
pub fn solve<P: SaddleProblem + ?Sized>(
    problem: &P,
    start: SaddleIterate,
    sched: &StepSchedule,
    mode: SolveMode,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    start.check(problem)?;
    let stride = opts.effective_stride();
    let mut it = start;
    problem.project_primal(&mut it.x);
    for l in it.lambda.iter_mut() {
        *l = l.max(0.0);
    }

    let mut trajectory = vec![point(problem, &it)];
    let mut max_subgrad_norm = 0.0_f64;
    let mut quiet = 0usize;
    let mut stop = StopReason::MaxIters;

    for _ in 0..opts.max_iters {
        let grad = problem.lagrangian_subgrad(&it.x, &it.lambda);
        let f = problem.constraint_values(&it.x);
        let combined = (norm(&grad).powi(2) + norm(&f).powi(2)).sqrt();
        if combined.is_finite() {
            max_subgrad_norm = max_subgrad_norm.max(combined);
        }
        let next = match mode {
            SolveMode::PrimalDual => step_from_parts(problem, &it, sched, &grad, &f)?,
            SolveMode::DualDriven => dual_driven_step(problem, &it, sched, &opts.inner)?,
        };
        let moved_x = distance(&next.x, &it.x);
        let moved_l = distance(&next.lambda, &it.lambda);
        it = next;
        if it.t.is_multiple_of(stride) {
            trajectory.push(point(problem, &it));
        }
        if moved_x < opts.tol && moved_l < opts.tol {
            quiet += 1;
            if quiet >= opts.patience {
                stop = StopReason::Stalled { t: it.t };
                break;
            }
        } else {
            quiet = 0;
        }
    }
    if trajectory.last().map(|p| p.t) != Some(it.t) {
        trajectory.push(point(problem, &it));
    }
    Ok(SolveReport {
        final_iterate: it,
        trajectory,
        max_subgrad_norm,
        stop,
    })
}

fn point<P: SaddleProblem + ?Sized>(problem: &P, it: &SaddleIterate) -> TrajectoryPoint {
    TrajectoryPoint {
        t: it.t,
        x: it.x.clone(),
        lambda: it.lambda.clone(),
        lagrangian: lagrangian_unchecked(problem, &it.x, &it.lambda),
    }
}

/// `maximize -‖x - c‖² s.t. a_i·x + b_i >= 0, lo <= x <= hi`.
///
/// Strictly concave with affine constraints, so the saddle is unique in `x`
/// and the primal maximizer for fixed `λ` is a clamped shift of `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticProblem {
    pub center: Vec<f64>,
    pub constraints: Vec<(Vec<f64>, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QuadraticProblem {
    pub fn new(
        center: Vec<f64>,
        constraints: Vec<(Vec<f64>, f64)>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let k = center.len();
        if k == 0 {
            return Err(Error::InvalidArgument("empty primal vector".into()));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidArgument("at least one constraint is required".into()));
        }
        check_len("lower bound", k, lower.len())?;
        check_len("upper bound", k, upper.len())?;
        for (a, _) in &constraints {
            check_len("constraint normal", k, a.len())?;
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box has lower > upper".into()));
        }
        Ok(Self {
            center,
            constraints,
            lower,
            upper,
        })
    }
}

impl SaddleProblem for QuadraticProblem {
    fn primal_dim(&self) -> usize {
        self.center.len()
    }

    fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    fn objective_value(&self, x: &[f64]) -> f64 {
        -x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
    }

    fn objective_subgrad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(xi, ci)| -2.0 * (xi - ci)).collect()
    }

    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|(a, b)| a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() + b)
            .collect()
    }

    fn constraint_subgrads(&self, _x: &[f64]) -> Vec<Vec<f64>> {
        self.constraints.iter().map(|(a, _)| a.clone()).collect()
    }

    fn project_primal(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    fn closed_form_primal_argmax(&self, lambda: &[f64]) -> Option<Vec<f64>> {
        let mut x = self.center.clone();
        for ((a, _), l) in self.constraints.iter().zip(lambda) {
            for (xi, ai) in x.iter_mut().zip(a) {
                *xi += 0.5 * l * ai;
            }
        }
        self.project_primal(&mut x);
        Some(x)
    }
}

/// Reference problems with known saddle points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinProblem {
    /// `max -(x-1)² s.t. 0.5 - x >= 0, x in [-10, 10]`; saddle `(0.5, 1)`.
    Qp1d,
    /// `max -x² s.t. x + 5 >= 0, x in [-10, 10]`; saddle `(0, 0)`.
    Inactive,
    /// `max -‖x-(1,1)‖² s.t. 1 - x1 - x2 >= 0, x in [-10, 10]²`; saddle `((0.5, 0.5), 1)`.
    Qp2d,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 3] = [Self::Qp1d, Self::Inactive, Self::Qp2d];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Qp1d => "qp1d",
            Self::Inactive => "inactive",
            Self::Qp2d => "qp2d",
        }
    }

    pub fn problem(&self) -> QuadraticProblem {
        let (center, constraints, k) = match self {
            Self::Qp1d => (vec![1.0], vec![(vec![-1.0], 0.5)], 1),
            Self::Inactive => (vec![0.0], vec![(vec![1.0], 5.0)], 1),
            Self::Qp2d => (vec![1.0, 1.0], vec![(vec![-1.0, -1.0], 1.0)], 2),
        };
        QuadraticProblem::new(center, constraints, vec![-10.0; k], vec![10.0; k])
            .expect("builtin problems are well-formed")
    }

    /// Analytic saddle `(x*, λ*)` from the KKT conditions.
    pub fn known_saddle(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Qp1d => (vec![0.5], vec![1.0]),
            Self::Inactive => (vec![0.0], vec![0.0]),
            Self::Qp2d => (vec![0.5, 0.5], vec![1.0]),
        }
    }
}

impl FromStr for BuiltinProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "problem",
                name: s.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qp1d() -> QuadraticProblem {
        BuiltinProblem::Qp1d.problem()
    }

    fn at(x: f64, l: f64) -> SaddleIterate {
        SaddleIterate::new(vec![x], vec![l])
    }

    #[test]
    fn lagrangian_examples() {
        let p = qp1d();
        assert_eq!(lagrangian_value(&p, &[1.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(lagrangian_value(&p, &[0.0], &[2.0]).unwrap(), 0.0);
        assert_eq!(lagrangian_value(&p, &[0.5], &[1.0]).unwrap(), -0.25);
    }

    #[test]
    fn qp1d_saddle_by_grid() {
        // min over λ of max over x, on a grid: the minimax point is (0.5, 1)
        // with value -0.25.
        let p = qp1d();
        let xs: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 * 0.0075).collect();
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..=300 {
            let l = j as f64 * 0.01;
            let inner = xs
                .iter()
                .map(|&x| lagrangian_value(&p, &[x], &[l]).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            if inner < best.0 {
                best = (inner, l);
            }
        }
        assert_abs_diff_eq!(best.1, 1.0, epsilon = 0.011);
        assert_abs_diff_eq!(best.0, -0.25, epsilon = 1e-3);
    }

    #[test]
    fn lagrangian_rejects_bad_shapes() {
        let p = qp1d();
        assert!(matches!(
            lagrangian_value(&p, &[0.0, 1.0], &[0.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            lagrangian_value(&p, &[0.0], &[]),
            Err(Error::Dimension { .. })
        ));
        assert!(lagrangian_value(&p, &[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn primal_dual_step_examples() {
        let p = qp1d();
        let s = StepSchedule::constant(0.1).unwrap();
        let next = primal_dual_step(&p, &at(0.0, 0.0), &s).unwrap();
        assert_abs_diff_eq!(next.x[0], 0.2, epsilon = 1e-15);
        assert_eq!(next.lambda[0], 0.0);
        assert_eq!(next.t, 1);

        let fixed = primal_dual_step(&p, &at(0.5, 1.0), &s).unwrap();
        assert_eq!(fixed.x, vec![0.5]);
        assert_eq!(fixed.lambda, vec![1.0]);

        // F(0) = 0.5, λ = 0.01 - 0.05 clips to 0
        let clipped = primal_dual_step(&p, &at(0.0, 0.01), &s).unwrap();
        assert_eq!(clipped.lambda, vec![0.0]);
    }

    #[test]
    fn default_schedule_first_step_is_a_tenth() {
        let s = StepSchedule::default();
        assert_eq!(s.at(0), 0.1);
        assert!(s.is_summable());
        assert!(!StepSchedule::constant(0.1).unwrap().is_summable());
        assert!(StepSchedule::harmonic(0.0, 1.0).is_err());
        assert!(StepSchedule::harmonic(1.0, -1.0).is_err());
    }

    #[test]
    fn non_finite_gradient_is_reported_with_iteration() {
        struct Bad;
        impl SaddleProblem for Bad {
            fn primal_dim(&self) -> usize {
                1
            }
            fn constraint_count(&self) -> usize {
                1
            }
            fn objective_value(&self, x: &[f64]) -> f64 {
                x[0].ln()
            }
            fn objective_subgrad(&self, x: &[f64]) -> Vec<f64> {
                vec![1.0 / x[0]]
            }
            fn constraint_values(&self, _x: &[f64]) -> Vec<f64> {
                vec![1.0]
            }
            fn constraint_subgrads(&self, _x: &[f64]) -> Vec<Vec<f64>> {
                vec![vec![0.0]]
            }
            fn project_primal(&self, _x: &mut [f64]) {}
        }
        let mut it = at(0.0, 0.0);
        it.t = 7;
        let err = primal_dual_step(&Bad, &it, &StepSchedule::default()).unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                what: "primal subgradient",
                t: 7
            }
        );
    }

    #[test]
    fn dual_driven_primal_argmax() {
        let p = qp1d();
        let s = StepSchedule::constant(0.1).unwrap();
        let inner = InnerAscent::default();
        let closed = dual_driven_step(&p, &at(-3.0, 1.0), &s, &inner).unwrap();
        assert_abs_diff_eq!(closed.x[0], 0.5, epsilon = 1e-15);
        let zero = dual_driven_step(&p, &at(-3.0, 0.0), &s, &inner).unwrap();
        assert_abs_diff_eq!(zero.x[0], 1.0, epsilon = 1e-15);

        let hidden = WithoutClosedForm(&p);
        let inner = InnerAscent {
            max_steps: 10_000,
            ..InnerAscent::default()
        };
        let ascent = dual_driven_step(&hidden, &at(-3.0, 1.0), &s, &inner).unwrap();
        assert_abs_diff_eq!(ascent.x[0], 0.5, epsilon = 1e-4);
    }

    #[test]
    fn builtin_names_round_trip() {
        for p in BuiltinProblem::ALL {
            assert_eq!(p.name().parse::<BuiltinProblem>().unwrap(), p);
        }
        assert!("qp3d".parse::<BuiltinProblem>().is_err());
    }

    #[test]
    fn constraint_subgrads_match_finite_differences() {
        let p = BuiltinProblem::Qp2d.problem();
        let x = [0.3, -0.7];
        let h = 1e-6;
        let jac = p.constraint_subgrads(&x);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fd = (p.constraint_values(&xp)[0] - p.constraint_values(&xm)[0]) / (2.0 * h);
            assert!((fd - jac[0][j]).abs() <= 1e-4 * jac[0][j].abs().max(1.0));
        }
    }

    #[test]
    fn solve_stops_when_stalled() {
        let p = BuiltinProblem::Inactive.problem();
        let opts = SolveOptions::new(100_000, 1e-12);
        let report = solve(
            &p,
            SaddleIterate::origin(&p),
            &StepSchedule::default(),
            SolveMode::DualDriven,
            &opts,
        )
        .unwrap();
        assert!(report.converged());
        assert_eq!(report.final_iterate.x, vec![0.0]);
        assert_eq!(report.final_iterate.lambda, vec![0.0]);
        assert!(report.trajectory.len() >= 2);
    }

    #[test]
    fn trajectory_stride_defaults_to_thousandth() {
        let p = qp1d();
        let opts = SolveOptions::new(10_000, 0.0);
        assert_eq!(opts.effective_stride(), 10);
        let report = solve(
            &p,
            SaddleIterate::origin(&p),
            &StepSchedule::default(),
            SolveMode::PrimalDual,
            &opts,
        )
        .unwrap();
        assert_eq!(report.trajectory.len(), 1001);
        assert_eq!(report.stop, StopReason::MaxIters);
        assert!(report.max_subgrad_norm.is_finite());
    }
}
