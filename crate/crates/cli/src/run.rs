//! Executes resolved configurations and writes their artifacts.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualgan::finite_gan::{gan_lagrangian, train_function_space, DistributionVector, FiniteGanOptions, FiniteGanState};
use dualgan::saddle::{solve, SaddleIterate, SaddleProblem, SolveOptions};
use dualgan::trainer::{toy_grid, train_with_progress, ExperimentSpec, MetricsRow, TrainOutput};
use dualgan::Divergence;

use crate::config::{ExperimentConfig, ExperimentPlan, FiniteGanConfig, RunConfig, SolveConfig};
use crate::output::{fmt_num, fmt_opt, Manifest, RunDir};
use crate::plots::{render, Series};

/// Outcome of one run: its manifest and a one-line human summary.
/// Starting discriminator value of a finite-GAN run without `--random-init`.
pub const DEFAULT_INIT_D: f64 = 0.5;

pub struct RunResult {
    pub manifest: Manifest,
    pub summary: String,
    pub last_row: Option<MetricsRow>,
}

pub fn execute(config: &RunConfig, out: &Path, progress: bool) -> Result<RunResult> {
    match config {
        RunConfig::Solve(c) => run_solve(c, config, out),
        RunConfig::FiniteGan(c) => run_finite_gan(c, config, out),
        RunConfig::Experiment(c) => run_experiment(c, config, out, progress),
    }
}

fn join(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn run_solve(c: &SolveConfig, config: &RunConfig, out: &Path) -> Result<RunResult> {
    let problem = c.problem.problem();
    let start = match c.seed {
        None => SaddleIterate::origin(&problem),
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = (0..problem.primal_dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let lambda = (0..problem.constraint_count()).map(|_| rng.random_range(0.0..2.0)).collect();
            SaddleIterate::new(x, lambda)
        }
    };
    let mut opts = SolveOptions::new(c.iters, c.tol);
    opts.stride = Some(c.stride);
    let report = solve(&problem, start, &c.schedule, c.mode, &opts)?;

    let mut dir = RunDir::create(out)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=problem.primal_dim()).map(|i| format!("x{i}")));
    header.extend((1..=problem.constraint_count()).map(|i| format!("lambda{i}")));
    header.push("lagrangian".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = report.trajectory.iter().map(|p| {
        let mut r = vec![p.t.to_string()];
        r.extend(p.x.iter().chain(&p.lambda).map(|v| fmt_num(*v)));
        r.push(fmt_num(p.lagrangian));
        r
    });
    dir.write_csv("trajectory.csv", &header, rows)?;

    let (xs, ls) = c.problem.known_saddle();
    let fin = &report.final_iterate;
    let summary = format!(
        "{} {}: t={} x={} lambda={} |x-x*|={} |lambda-lambda*|={} stop={}",
        c.problem.name(),
        c.mode,
        fin.t,
        join(&fin.x),
        join(&fin.lambda),
        fmt_num(dist(&fin.x, &xs)),
        fmt_num(dist(&fin.lambda, &ls)),
        if report.converged() { "stalled" } else { "max-iters" },
    );
    Ok(RunResult {
        manifest: dir.finish(config)?,
        summary,
        last_row: None,
    })
}

fn run_finite_gan(c: &FiniteGanConfig, config: &RunConfig, out: &Path) -> Result<RunResult> {
    let spec = Divergence::with_params(c.divergence, c.epsilon_wgan, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let p_d = DistributionVector::random(c.n, &mut rng)?;
    let init = if c.random_init {
        // keep wide-domain rows within a moderate starting range
        let lo = spec.domain.lo.max(-5.0);
        let hi = spec.domain.hi.min(5.0);
        FiniteGanState {
            d: (0..c.n).map(|_| rng.random_range(lo..hi)).collect(),
            p_g: DistributionVector::random(c.n, &mut rng)?.probs().to_vec(),
        }
    } else {
        FiniteGanState::uniform(c.n, spec.domain.clamp(DEFAULT_INIT_D))
    };
    let opts = FiniteGanOptions {
        mode: c.mode,
        schedule: c.schedule,
        max_iters: c.iters,
        tol: c.tol,
        stride: Some(c.stride),
        simplex_projection: c.simplex,
    };
    let run = train_function_space(&p_d, &spec, init, &opts)?;

    let mut dir = RunDir::create(out)?;
    let rows = run
        .samples
        .iter()
        .map(|(t, s)| -> Result<Vec<String>> {
            Ok(vec![
                t.to_string(),
                fmt_num(s.tv_distance(&p_d)),
                fmt_num(s.max_discriminator_error(&p_d, &spec)),
                fmt_num(gan_lagrangian(s, &p_d, &spec)?),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    dir.write_csv(
        "trajectory.csv",
        &["t", "tv_distance", "max_abs_d_minus_dstar", "lagrangian"],
        rows,
    )?;
    let fin = &run.final_state;
    let state_rows = (0..c.n).map(|i| {
        vec![
            i.to_string(),
            fmt_num(p_d.probs()[i]),
            fmt_num(fin.p_g[i]),
            fmt_num(fin.d[i]),
            fmt_num(spec.saddle_discriminator(p_d.probs()[i])),
        ]
    });
    dir.write_csv("final_state.csv", &["symbol", "p_data", "p_gen", "d", "d_star"], state_rows)?;

    let summary = format!(
        "finite-gan {} n={} {}: t={} tv={} max|d-d*|={} max|p_g-p_d|={}",
        spec.name(),
        c.n,
        c.mode,
        run.iterations,
        fmt_num(fin.tv_distance(&p_d)),
        fmt_num(fin.max_discriminator_error(&p_d, &spec)),
        fmt_num(fin.max_mass_error(&p_d)),
    );
    Ok(RunResult {
        manifest: dir.finish(config)?,
        summary,
        last_row: None,
    })
}

pub const METRICS_HEADER: [&str; 9] = [
    "iter",
    "sigma",
    "disc_objective",
    "gen_adversarial",
    "gen_penalty",
    "quantile90",
    "d_at_atom",
    "modes_covered",
    "hq_fraction",
];

fn metrics_record(r: &MetricsRow) -> Vec<String> {
    vec![
        r.iter.to_string(),
        fmt_num(r.sigma),
        fmt_num(r.disc_objective),
        fmt_num(r.gen_adversarial),
        fmt_num(r.gen_penalty),
        fmt_opt(r.quantile90),
        fmt_opt(r.d_at_atom),
        r.modes_covered.map(|m| m.to_string()).unwrap_or_default(),
        fmt_opt(r.hq_fraction),
    ]
}

fn describe_row(r: &MetricsRow) -> String {
    let mut s = format!("iter={}", r.iter);
    if let Some(q) = r.quantile90 {
        s += &format!(" quantile90={}", fmt_num(q));
    }
    if let Some(d) = r.d_at_atom {
        s += &format!(" D(atom)={}", fmt_num(d));
    }
    if let Some(m) = r.modes_covered {
        s += &format!(" modes_covered={m}");
    }
    if let Some(h) = r.hq_fraction {
        s += &format!(" hq_fraction={}", fmt_num(h));
    }
    s
}

fn run_experiment(c: &ExperimentConfig, config: &RunConfig, out: &Path, progress: bool) -> Result<RunResult> {
    let label = format!("{} {} seed={}", c.experiment.name(), c.method, c.train.seed);
    let output = train_with_progress(&c.train, &c.experiment, |row| {
        if progress {
            eprintln!("[{label}] {}", describe_row(row));
        }
    })
    .with_context(|| format!("training {label}"))?;

    let mut dir = RunDir::create(out)?;
    dir.write_csv("metrics.csv", &METRICS_HEADER, output.rows.iter().map(metrics_record))?;
    let dim = output.final_samples.ncols();
    let sample_header: Vec<&str> = ["x", "y"].into_iter().take(dim).collect();
    dir.write_csv(
        "samples.csv",
        &sample_header,
        output.final_samples.rows().into_iter().map(|r| r.iter().map(|v| fmt_num(*v)).collect()),
    )?;
    if output.rows.iter().any(|r| !r.disc_grid.is_empty()) {
        let grid = toy_grid();
        let rows = output.rows.iter().flat_map(|r| {
            grid.iter()
                .zip(&r.disc_grid)
                .map(|(x, d)| vec![r.iter.to_string(), fmt_num(*x), fmt_num(*d)])
                .collect::<Vec<_>>()
        });
        dir.write_csv("disc_grid.csv", &["iter", "x", "d"], rows)?;
    }
    if !output.snapshots.is_empty() {
        let snaps: Vec<_> = output
            .snapshots
            .iter()
            .map(|s| {
                serde_json::json!({
                    "iter": s.iter,
                    "generator": s.generator,
                    "discriminator": s.discriminator,
                })
            })
            .collect();
        dir.write_text("snapshots.json", &(serde_json::to_string(&snaps)? + "\n"))?;
    }
    if c.plots {
        write_plots(&mut dir, c, &output)?;
    }
    let last_row = output.rows.last().cloned();
    let summary = format!("{label}: {}", last_row.as_ref().map(describe_row).unwrap_or_default());
    Ok(RunResult {
        manifest: dir.finish(config)?,
        summary,
        last_row,
    })
}

fn write_plots(dir: &mut RunDir, c: &ExperimentConfig, output: &TrainOutput) -> Result<()> {
    const BLUE: &str = "#1f77b4";
    const ORANGE: &str = "#ff7f0e";
    match &c.experiment {
        ExperimentSpec::Toy1d { .. } => {
            let q: Vec<(f64, f64)> = output
                .rows
                .iter()
                .filter_map(|r| r.quantile90.map(|q| (r.iter as f64, q)))
                .collect();
            let svg = render(
                "90% quantile of generated samples",
                "iteration",
                "quantile",
                &[Series::Line { points: &q, color: BLUE, label: c.method.name() }],
            );
            dir.write_text("quantile90.svg", &svg)?;

            let grid = toy_grid();
            let picks = pick_rows(&output.rows, 4);
            let curves: Vec<Vec<(f64, f64)>> = picks
                .iter()
                .map(|r| grid.iter().copied().zip(r.disc_grid.iter().copied()).collect())
                .collect();
            let labels: Vec<String> = picks.iter().map(|r| format!("iter {}", r.iter)).collect();
            let colors = [BLUE, ORANGE, "#2ca02c", "#d62728"];
            let series: Vec<Series> = curves
                .iter()
                .zip(&labels)
                .zip(colors)
                .map(|((p, l), color)| Series::Line { points: p, color, label: l })
                .collect();
            dir.write_text("discriminator.svg", &render("Discriminator output", "x", "D(x)", &series))?;
        }
        ExperimentSpec::Gauss8 { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.train.seed);
            rng.set_stream(2);
            let data = c.experiment.sample_data(output.final_samples.nrows(), &mut rng);
            let to_pts = |a: &ndarray::Array2<f64>| -> Vec<(f64, f64)> { a.rows().into_iter().map(|r| (r[0], r[1])).collect() };
            let d = to_pts(&data);
            let g = to_pts(&output.final_samples);
            let svg = render(
                "Data and generated samples",
                "x",
                "y",
                &[
                    Series::Scatter { points: &d, color: BLUE, label: "data" },
                    Series::Scatter { points: &g, color: ORANGE, label: "generated" },
                ],
            );
            dir.write_text("scatter.svg", &svg)?;
        }
    }
    Ok(())
}

/// Up to `k` rows spread evenly over the run, always including the last.
fn pick_rows(rows: &[MetricsRow], k: usize) -> Vec<&MetricsRow> {
    if rows.len() <= k {
        return rows.iter().collect();
    }
    (0..k).map(|i| &rows[i * (rows.len() - 1) / (k - 1)]).collect()
}

/// Runs an experiment plan: a single run, or one run per seed in
/// `<out>/seed-<s>` with a `summary.csv` beside them.
pub fn execute_plan(plan: &ExperimentPlan, out: &Path) -> Result<Vec<RunResult>> {
    if !plan.sweep {
        let config = RunConfig::Experiment(Box::new(plan.base.clone()));
        return Ok(vec![execute(&config, out, plan.progress)?]);
    }
    let jobs: Vec<(u64, PathBuf)> = plan
        .seeds
        .iter()
        .map(|&s| (s, out.join(format!("seed-{s}"))))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunResult>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..plan.jobs.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((seed, dir)) = jobs.get(i) else { break };
                let mut cfg = plan.base.clone();
                cfg.train.seed = *seed;
                let r = execute(&RunConfig::Experiment(Box::new(cfg)), dir, plan.progress);
                if let Ok(ok) = &r {
                    crate::say!("{}", ok.summary);
                }
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    let results: Vec<RunResult> = results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<_>>()?;
    let mut top = RunDir::create(out)?;
    let rows = jobs.iter().zip(&results).map(|((seed, _), r)| {
        let mut rec = vec![seed.to_string()];
        rec.extend(r.last_row.as_ref().map(metrics_record).unwrap_or_default());
        rec
    });
    let mut header = vec!["seed"];
    header.extend(METRICS_HEADER);
    top.write_csv("summary.csv", &header, rows)?;
    Ok(results)
}
