//! Command-line flags, JSON config files and the resolved run configurations.
//!
//! Every subcommand accepts `--config FILE`, a JSON object whose keys mirror
//! the long flag names (with underscores). Flags given on the command line win
//! over the file. The merged values are then resolved into a `RunConfig`
//! with every default filled in; that is what the manifest records.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use dualgan::finite_gan::FiniteGanOptions;
use dualgan::saddle::BuiltinProblem;
use dualgan::trainer::{ExperimentSpec, Method, TrainConfig};
use dualgan::{DivergenceKind, SolveMode, StepSchedule};

#[derive(Debug, Parser)]
#[command(name = "dualgan", version, about = "Primal-dual saddle solvers and GAN experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one of the built-in concave programs and trace the iterates.
    Solve(SolveArgs),
    /// Train a GAN over a finite alphabet directly in function space.
    FiniteGan(FiniteGanArgs),
    /// Run a synthetic training experiment (toy1d or gauss8).
    Experiment(ExperimentArgs),
    /// Re-run a finished run from its manifest and compare checksums.
    Replay(ReplayArgs),
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// Built-in problem: qp1d, inactive or qp2d.
    #[arg(long)]
    pub problem: Option<String>,
    /// dual-driven or primal-dual.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Movement tolerance of the stopping rule.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Step size a/(b+t): the numerator.
    #[arg(long)]
    pub step_a: Option<f64>,
    /// Step size a/(b+t): the offset.
    #[arg(long)]
    pub step_b: Option<f64>,
    /// Start from a random point drawn with this seed instead of the origin.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep every n-th iterate in the trajectory CSV.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteGanArgs {
    /// Alphabet size.
    #[arg(long)]
    pub n: Option<usize>,
    /// kl, reverse_kl, pearson_chi2, squared_hellinger, js, approx_wgan or quadratic_other.
    #[arg(long)]
    pub divergence: Option<String>,
    #[arg(long)]
    pub epsilon_wgan: Option<f64>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub step_a: Option<f64>,
    #[arg(long)]
    pub step_b: Option<f64>,
    /// Seeds the data distribution and, with `--random-init`, the start.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Renormalize the generated masses after every dual step.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub simplex: bool,
    /// Draw the starting discriminator and generated masses from the seed
    /// instead of D = 1/2 with uniform masses.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub random_init: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentArgs {
    /// toy1d or gauss8.
    pub experiment: Option<String>,
    /// proposed, gan or wgan.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed sweep such as `1..5` (inclusive) or `1,4,9`; one subdirectory per seed.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Parallel workers for a seed sweep.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Metrics every n iterations.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Step size of the target-distribution update.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Discriminator steps per iteration.
    #[arg(long)]
    pub k0: Option<usize>,
    #[arg(long)]
    pub eval_samples: Option<usize>,
    /// Dump network parameters at these iterations.
    #[arg(long, value_delimiter = ',')]
    pub snapshot_at: Option<Vec<usize>>,
    /// Also write SVG plots.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub plots: bool,
    /// Print every metrics row to stderr while training.
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub progress: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest file, or the run directory containing it.
    pub manifest: PathBuf,
    /// Where to write the replayed artifacts (default: `<run dir>-replay`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Overlays command-line values onto the config file named by `config`.
pub fn merge_with_file<T>(cli: T, config: Option<&Path>) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let Some(path) = config else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut base: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let Some(base_map) = base.as_object_mut() else {
        bail!("{} must hold a JSON object", path.display());
    };
    let serde_json::Value::Object(over) = serde_json::to_value(&cli)? else {
        unreachable!("flag structs serialize to objects");
    };
    for (k, v) in over {
        if !v.is_null() {
            base_map.insert(k, v);
        }
    }
    serde_json::from_value(base).with_context(|| format!("invalid keys or values in {}", path.display()))
}

/// A usage problem: reported with the usage text and exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| UsageError(format!("the following required argument was not provided: --{flag}")).into())
}

fn parse_name<T: std::str::FromStr>(s: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>()
        .map_err(|e| UsageError(format!("invalid {what} '{s}': {e}")).into())
}

fn schedule(a: Option<f64>, b: Option<f64>, default: StepSchedule) -> Result<StepSchedule> {
    let StepSchedule::Harmonic { a: da, b: db } = default else {
        unreachable!("defaults are harmonic");
    };
    StepSchedule::harmonic(a.unwrap_or(da), b.unwrap_or(db)).map_err(|e| UsageError(e.to_string()).into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub problem: BuiltinProblem,
    pub mode: SolveMode,
    pub iters: usize,
    pub tol: f64,
    pub schedule: StepSchedule,
    /// `None` starts from the origin.
    pub seed: Option<u64>,
    pub stride: usize,
}

pub const SOLVE_DEFAULT_ITERS: usize = 100_000;
pub const SOLVE_DEFAULT_TOL: f64 = 1e-12;

impl SolveConfig {
    pub fn resolve(args: SolveArgs) -> Result<Self> {
        let iters = args.iters.unwrap_or(SOLVE_DEFAULT_ITERS);
        Ok(Self {
            problem: parse_name(&required(args.problem, "problem")?, "problem")?,
            mode: parse_name(args.mode.as_deref().unwrap_or("primal-dual"), "mode")?,
            iters,
            tol: args.tol.unwrap_or(SOLVE_DEFAULT_TOL),
            schedule: schedule(args.step_a, args.step_b, StepSchedule::default())?,
            seed: args.seed,
            stride: args.stride.unwrap_or((iters / 1000).max(1)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGanConfig {
    pub n: usize,
    pub divergence: DivergenceKind,
    pub epsilon_wgan: Option<f64>,
    pub mode: SolveMode,
    pub iters: usize,
    pub tol: f64,
    pub schedule: StepSchedule,
    pub seed: u64,
    pub stride: usize,
    pub simplex: bool,
    pub random_init: bool,
}

pub const FINITE_GAN_DEFAULT_N: usize = 10;
pub const FINITE_GAN_DEFAULT_ITERS: usize = 200_000;

impl FiniteGanConfig {
    pub fn resolve(args: FiniteGanArgs) -> Result<Self> {
        let iters = args.iters.unwrap_or(FINITE_GAN_DEFAULT_ITERS);
        let mode: SolveMode = parse_name(args.mode.as_deref().unwrap_or("dual-driven"), "mode")?;
        let defaults = FiniteGanOptions::new(mode, iters);
        let n = args.n.unwrap_or(FINITE_GAN_DEFAULT_N);
        if n == 0 {
            return Err(UsageError("--n must be at least 1".into()).into());
        }
        Ok(Self {
            n,
            divergence: parse_name(&required(args.divergence, "divergence")?, "divergence")?,
            epsilon_wgan: args.epsilon_wgan,
            mode,
            iters,
            tol: args.tol.unwrap_or(defaults.tol),
            schedule: schedule(args.step_a, args.step_b, defaults.schedule)?,
            seed: args.seed.unwrap_or(0),
            stride: args.stride.unwrap_or((iters / 1000).max(1)),
            simplex: args.simplex,
            random_init: args.random_init,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSpec,
    pub method: Method,
    pub train: TrainConfig,
    pub plots: bool,
}

/// Resolved experiment plus the seeds to sweep (one entry without `--seeds`).
pub struct ExperimentPlan {
    pub base: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub sweep: bool,
    pub jobs: usize,
    pub progress: bool,
}

impl ExperimentPlan {
    pub fn resolve(args: ExperimentArgs) -> Result<Self> {
        let experiment: ExperimentSpec = parse_name(&required(args.experiment, "experiment")?, "experiment")?;
        let method: Method = parse_name(args.method.as_deref().unwrap_or("proposed"), "method")?;
        let mut train = TrainConfig::for_experiment(&experiment, method);
        if let Some(v) = args.iters {
            train.iterations = v;
        }
        if let Some(v) = args.seed {
            train.seed = v;
        }
        if let Some(v) = args.stride {
            train.metrics_stride = v;
        }
        if let Some(v) = args.alpha {
            train.alpha_target = v;
        }
        if let Some(v) = args.k0 {
            train.k0 = v;
        }
        if let Some(v) = args.eval_samples {
            train.eval_samples = v;
        }
        if let Some(v) = args.snapshot_at {
            train.snapshot_at = v;
        }
        train.validate().map_err(|e| UsageError(e.to_string()))?;
        let (seeds, sweep) = match &args.seeds {
            Some(s) => (parse_seeds(s)?, true),
            None => (vec![train.seed], false),
        };
        Ok(Self {
            base: ExperimentConfig {
                experiment,
                method,
                train,
                plots: args.plots,
            },
            seeds,
            sweep,
            jobs: args.jobs.unwrap_or(1).max(1),
            progress: args.progress,
        })
    }
}

/// `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || UsageError(format!("invalid seed list '{s}': expected `a..b` or `a,b,c`"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad().into());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<std::result::Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad().into());
    }
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum RunConfig {
    Solve(SolveConfig),
    FiniteGan(FiniteGanConfig),
    Experiment(Box<ExperimentConfig>),
}

impl RunConfig {
    pub fn subcommand(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::FiniteGan(_) => "finite-gan",
            Self::Experiment(_) => "experiment",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Solve(c) => c.seed,
            Self::FiniteGan(c) => Some(c.seed),
            Self::Experiment(c) => Some(c.train.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("4, 9,2").unwrap(), vec![4, 9, 2]);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"problem": "qp2d", "iters": 50, "tol": 1e-3}"#).unwrap();
        let cli = SolveArgs {
            iters: Some(70),
            ..Default::default()
        };
        let merged = merge_with_file(cli, Some(&path)).unwrap();
        assert_eq!(merged.problem.as_deref(), Some("qp2d"));
        assert_eq!(merged.iters, Some(70));
        assert_eq!(merged.tol, Some(1e-3));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"problme": "qp2d"}"#).unwrap();
        assert!(merge_with_file(SolveArgs::default(), Some(&path)).is_err());
    }

    #[test]
    fn defaults_are_materialized() {
        let c = SolveConfig::resolve(SolveArgs {
            problem: Some("qp1d".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.iters, SOLVE_DEFAULT_ITERS);
        assert_eq!(c.stride, 100);
        assert_eq!(c.mode, SolveMode::PrimalDual);
    }
}
