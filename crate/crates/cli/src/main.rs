mod args;
mod cohort;
mod config;
mod model;
mod serve;

use std::path::Path;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use forgescore_core::fusion::FusionError;

use crate::args::{Cli, Command};
use crate::config::{write_run_json, Ctx, Layers, UsageError};

/// 1 usage, 2 data, 3 numerical failure during training.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if matches!(cause.downcast_ref::<FusionError>(), Some(FusionError::NonFiniteLoss { .. })) {
            return 3;
        }
    }
    2
}

/// The error chain joined by `: `, skipping causes a parent already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let layers = Layers::load(cli.config.as_deref())?;
    let seed = layers.top("seed", cli.seed, 0u64)?;
    let default_workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let workers = layers.top("workers", cli.workers, default_workers)?;
    if workers == 0 {
        return Err(config::usage("--workers must be at least 1"));
    }
    let ctx = Ctx { layers, seed, workers };

    let (resolved, out): (_, Option<&Path>) = match &cli.command {
        Command::Synth(a) => (cohort::synth(&ctx, a)?, Some(&a.out)),
        Command::Score(a) => (cohort::score(&ctx, a)?, Some(&a.out)),
        Command::Label(a) => (cohort::label(&ctx, a)?, Some(&a.out)),
        Command::Split(a) => (cohort::split(&ctx, a)?, Some(&a.out)),
        Command::Train(a) => (model::train(&ctx, a)?, Some(&a.out)),
        Command::Eval(a) => (model::eval(&ctx, a)?, Some(&a.out)),
        Command::Serve(a) => (serve::serve(&ctx, a)?, a.out.as_deref()),
    };
    if let Some(out) = out {
        let mut full = serde_json::json!({ "seed": ctx.seed });
        config::merge(&mut full, &resolved);
        write_run_json(out, cli.command.name(), &full, &started_at)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
