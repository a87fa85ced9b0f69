use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::LevelFilter;
use ocp_pinn_cli::config::{parse_test_list, RunConfig};
use ocp_pinn_cli::{run, CliError};

/// Train OCP-PINNs on the benchmark control problems and score them
/// against finite-difference reference solutions.
#[derive(Parser, Debug)]
#[command(name = "ocp-pinn", version)]
struct Args {
    /// Run configuration (flat `key = value` file).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Comma-separated test ids, replacing the configured list.
    #[arg(short, long)]
    tests: Option<String>,
    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Seed for sampling and network initialization.
    #[arg(short, long)]
    seed: Option<u64>,
    /// More log output (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
}

fn load(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::parse(&std::fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    if let Some(tests) = &args.tests {
        cfg.tests = parse_test_list(tests)?;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match (args.quiet, args.verbose) {
        (true, _) => LevelFilter::Error,
        (false, 0) => LevelFilter::Warn,
        (false, 1) => LevelFilter::Info,
        (false, 2) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).init();

    let cfg = match load(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(summary) if summary.success() => ExitCode::SUCCESS,
        Ok(summary) => {
            for (id, msg) in &summary.failures {
                eprintln!("error: {id}: {msg}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
