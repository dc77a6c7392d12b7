mod config;
mod output;
mod plots;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{CommandFactory, Parser};

use config::{
    merge_with_file, Cli, Command, ExperimentPlan, FiniteGanConfig, ReplayArgs, RunConfig, SolveConfig, UsageError,
};
use output::{resolve_out, sha256_file, Manifest};

/// `println!` that tolerates a closed stdout (e.g. piping into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}
pub(crate) use say;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<UsageError>() {
            Some(u) => Cli::command().error(clap::error::ErrorKind::ValueValidation, u).exit(),
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Solve(args) => {
            let file = args.config.clone();
            let args = merge_with_file(args, file.as_deref())?;
            let out = args.out.clone();
            let c = SolveConfig::resolve(args)?;
            let name = format!("solve-{}-{}", c.problem.name(), c.mode);
            single(RunConfig::Solve(c), resolve_out(out.as_deref(), &name))
        }
        Command::FiniteGan(args) => {
            let file = args.config.clone();
            let args = merge_with_file(args, file.as_deref())?;
            let out = args.out.clone();
            let c = FiniteGanConfig::resolve(args)?;
            let name = format!("finite-gan-{}-n{}-{}", c.divergence.name(), c.n, c.mode);
            single(RunConfig::FiniteGan(c), resolve_out(out.as_deref(), &name))
        }
        Command::Experiment(args) => {
            let file = args.config.clone();
            let args = merge_with_file(args, file.as_deref())?;
            let out = args.out.clone();
            let plan = ExperimentPlan::resolve(args)?;
            let b = &plan.base;
            let name = if plan.sweep {
                format!("{}-{}-sweep", b.experiment.name(), b.method)
            } else {
                format!("{}-{}-seed{}", b.experiment.name(), b.method, b.train.seed)
            };
            let out = resolve_out(out.as_deref(), &name);
            let results = run::execute_plan(&plan, &out)?;
            if !plan.sweep {
                say!("{}", results[0].summary);
            }
            say!("wrote {}", out.display());
            Ok(())
        }
        Command::Replay(args) => replay(args),
    }
}

fn single(config: RunConfig, out: PathBuf) -> Result<()> {
    let r = run::execute(&config, &out, false)?;
    say!("{}", r.summary);
    say!("wrote {} ({} artifacts)", out.display(), r.manifest.artifacts.len());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let out = args.out.unwrap_or_else(|| {
        let mut p = manifest.output_dir.clone().into_os_string();
        p.push("-replay");
        PathBuf::from(p)
    });
    let replayed = run::execute(&manifest.config, &out, false)?;
    let mut mismatched = Vec::new();
    for (name, digest) in &manifest.artifacts {
        let path = out.join(name);
        if !path.exists() || &sha256_file(&path)? != digest {
            mismatched.push(name.clone());
        }
    }
    say!("{}", replayed.summary);
    if !mismatched.is_empty() {
        bail!("replay differs from {} in: {}", manifest.output_dir.display(), mismatched.join(", "));
    }
    say!("replay matches: {} artifacts identical ({})", manifest.artifacts.len(), out.display());
    Ok(())
}
