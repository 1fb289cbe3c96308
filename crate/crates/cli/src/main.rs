//! `zrp <kind> --config <file> [--seed S] [--out DIR] [--threads K] [--allow-violations]`
//!
//! Exit status: 0 success, 2 config error, 3 hypothesis violation,
//! 4 runtime failure.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod manifest;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{ConfigError, ExperimentConfig, Kind};
use manifest::{sha256_hex, Manifest, OutputDir};
use runner::{run_experiment, RunContext, RunError};

#[derive(Parser, Debug)]
#[command(name = "zrp", version, about = "Zero range process experiments in random media")]
struct Cli {
    /// Experiment kind.
    kind: Kind,
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `replication.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replica parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Run even when a hypothesis check fails.
    #[arg(long)]
    allow_violations: bool,
}

fn fail(e: &RunError) -> ExitCode {
    eprintln!("zrp: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let raw = match std::fs::read(&cli.config) {
        Ok(b) => b,
        Err(e) => {
            return fail(&RunError::Config(ConfigError {
                key: "--config".into(),
                message: format!("{}: {e}", cli.config.display()),
            }))
        }
    };
    let config = match std::str::from_utf8(&raw)
        .map_err(|e| ConfigError { key: "<document>".into(), message: e.to_string() })
        .and_then(ExperimentConfig::parse)
    {
        Ok(c) => c,
        Err(e) => return fail(&RunError::Config(e)),
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            return fail(&RunError::Config(ConfigError {
                key: "--threads".into(),
                message: "must be positive".into(),
            }));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            return fail(&RunError::Runtime(e.to_string()));
        }
    }
    let seed = cli.seed.unwrap_or(config.replication.master_seed);
    let out_path = cli
        .out
        .clone()
        .or_else(|| config.output.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("zrp-out"));
    let mut out = match OutputDir::create(&out_path) {
        Ok(o) => o,
        Err(e) => return fail(&RunError::Runtime(format!("{}: {e}", out_path.display()))),
    };

    let start = chrono::Utc::now();
    let clock = Instant::now();
    let ctx = RunContext { kind: cli.kind, config: &config, seed, allow_violations: cli.allow_violations };
    let result = run_experiment(&ctx, &mut out);
    let manifest = Manifest {
        kind: cli.kind.name(),
        config_hash: sha256_hex(&raw),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        start_time: start.to_rfc3339(),
        end_time: chrono::Utc::now().to_rfc3339(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        status: match &result {
            Ok(()) => "ok".into(),
            Err(e) => e.to_string(),
        },
        outputs: Vec::new(),
    };
    if let Err(e) = out.finish(manifest) {
        return fail(&RunError::Runtime(e.to_string()));
    }
    match result {
        Ok(()) => {
            println!("zrp: {} finished, outputs in {}", cli.kind.name(), out_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
