//! Browser bindings. Each export has a plain-Rust twin (the `*_json` and
//! `kde_curve_values` functions) so that the logic is testable natively; the
//! `wasm_bindgen` wrappers only convert errors.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use dualgan::finite_gan::{train_function_space, DistributionVector, FiniteGanOptions, FiniteGanState};
use dualgan::kde::estimate_probs;
use dualgan::saddle::{solve, BuiltinProblem, SaddleIterate, SolveOptions};
use dualgan::{Divergence, SolveMode, StepSchedule};

/// Longest run the page may request; keeps the tab responsive.
pub const MAX_ITERS: usize = 2_000_000;
const POINTS: usize = 400;

#[derive(Serialize)]
struct SaddleTrace {
    t: Vec<usize>,
    x: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    lagrangian: Vec<f64>,
    x_star: Vec<f64>,
    lambda_star: Vec<f64>,
}

fn check_iters(iters: usize) -> Result<(), String> {
    if iters == 0 || iters > MAX_ITERS {
        return Err(format!("iterations must be in 1..={MAX_ITERS}, got {iters}"));
    }
    Ok(())
}

/// Trajectory of a built-in program from the origin, as JSON.
pub fn saddle_trajectory_json(problem: &str, mode: &str, iters: usize, step_a: f64, step_b: f64) -> Result<String, String> {
    check_iters(iters)?;
    let which: BuiltinProblem = problem.parse().map_err(|e: dualgan::Error| e.to_string())?;
    let mode: SolveMode = mode.parse().map_err(|e: dualgan::Error| e.to_string())?;
    let sched = StepSchedule::harmonic(step_a, step_b).map_err(|e| e.to_string())?;
    let p = which.problem();
    let mut opts = SolveOptions::new(iters, 0.0);
    opts.stride = Some((iters / POINTS).max(1));
    let report = solve(&p, SaddleIterate::origin(&p), &sched, mode, &opts).map_err(|e| e.to_string())?;
    let (x_star, lambda_star) = which.known_saddle();
    let tr = &report.trajectory;
    let trace = SaddleTrace {
        t: tr.iter().map(|q| q.t).collect(),
        x: tr.iter().map(|q| q.x.clone()).collect(),
        lambda: tr.iter().map(|q| q.lambda.clone()).collect(),
        lagrangian: tr.iter().map(|q| q.lagrangian).collect(),
        x_star,
        lambda_star,
    };
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FiniteGanTrace {
    t: Vec<usize>,
    tv: Vec<f64>,
    p_data: Vec<f64>,
    p_gen: Vec<f64>,
    d: Vec<f64>,
}

/// Function-space GAN on a random alphabet of size `n`, as JSON.
pub fn finite_gan_json(n: usize, divergence: &str, mode: &str, iters: usize, seed: u64) -> Result<String, String> {
    check_iters(iters)?;
    if n == 0 || n > 200 {
        return Err(format!("alphabet size must be in 1..=200, got {n}"));
    }
    let spec = Divergence::by_name(divergence, None).map_err(|e| e.to_string())?;
    let mode: SolveMode = mode.parse().map_err(|e: dualgan::Error| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_d = DistributionVector::random(n, &mut rng).map_err(|e| e.to_string())?;
    let init = FiniteGanState::uniform(n, spec.domain.clamp(0.5));
    let mut opts = FiniteGanOptions::new(mode, iters);
    opts.stride = Some((iters / POINTS).max(1));
    let run = train_function_space(&p_d, &spec, init, &opts).map_err(|e| e.to_string())?;
    let trace = FiniteGanTrace {
        t: run.samples.iter().map(|(t, _)| *t).collect(),
        tv: run.samples.iter().map(|(_, s)| s.tv_distance(&p_d)).collect(),
        p_data: p_d.probs().to_vec(),
        p_gen: run.final_state.p_g.clone(),
        d: run.final_state.d.clone(),
    };
    serde_json::to_string(&trace).map_err(|e| e.to_string())
}

/// Unnormalized Gaussian-kernel estimate of 1-D `samples` on `points`
/// evenly spaced grid points over `[lo, hi]`.
pub fn kde_curve_values(samples: &[f64], sigma: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return Err("need at least two grid points and hi > lo".into());
    }
    if samples.is_empty() {
        return Err("no samples".into());
    }
    let grid = Array2::from_shape_fn((points, 1), |(i, _)| lo + (hi - lo) * i as f64 / (points - 1) as f64);
    let s = Array2::from_shape_vec((samples.len(), 1), samples.to_vec()).map_err(|e| e.to_string())?;
    estimate_probs(grid.view(), s.view(), sigma).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn saddle_trajectory(problem: &str, mode: &str, iters: usize, step_a: f64, step_b: f64) -> Result<String, JsError> {
    saddle_trajectory_json(problem, mode, iters, step_a, step_b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn finite_gan(n: usize, divergence: &str, mode: &str, iters: usize, seed: u64) -> Result<String, JsError> {
    finite_gan_json(n, divergence, mode, iters, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kde_curve(samples: &[f64], sigma: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    kde_curve_values(samples, sigma, lo, hi, points).map_err(|e| JsError::new(&e))
}
