//! Command-line front end for the two scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tmcopt::config::{parse_config, parse_snapshots, RunConfig, ScenarioConfig, ScenarioKind};
use tmcopt::error::Error;
use tmcopt::run::{run_cshape, run_topopt, with_workers};
use tmcopt::scenario::Variant;

#[derive(Parser)]
#[command(name = "tmcopt", version, about = "Third medium contact analysis and topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML parameter file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "TMCOPT_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Assembly worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// C-shape contact analysis.
    Cshape {
        #[command(flatten)]
        common: Common,
        /// Comma-separated load fractions for field snapshots.
        #[arg(long, default_value = "")]
        snapshots: String,
    },
    /// End-compliance design of the clamped block.
    Top {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Variant,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_solver_failure() { EXIT_SOLVER } else { EXIT_CONFIG })
}

fn run(cli: Cli) -> Result<Option<Error>, Error> {
    match cli.command {
        Command::Cshape { common, snapshots } => {
            let ScenarioConfig::CShape(params) = parse_config(&common.config, ScenarioKind::CShape)? else {
                unreachable!()
            };
            let rc = RunConfig::new(common.out, parse_snapshots(&snapshots)?, common.workers)?;
            let out = with_workers(rc.workers, || run_cshape(&params, &rc))??;
            println!("history: {}", out.history_file.display());
            for f in &out.snapshot_files {
                println!("snapshot: {}", f.display());
            }
            Ok(out.failure)
        }
        Command::Top { common, variant } => {
            let ScenarioConfig::TopOpt(params) = parse_config(&common.config, ScenarioKind::TopOpt)? else {
                unreachable!()
            };
            let rc = RunConfig::new(common.out, Vec::new(), common.workers)?;
            let out = with_workers(rc.workers, || run_topopt(&params, variant, &rc))??;
            println!("trace: {}", out.trace_file.display());
            println!("fields: {}", out.field_file.display());
            if let Some(c) = out.final_compliance {
                println!("final c = {c:.6e}");
            }
            Ok(out.failure)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => exit_for(&failure),
        Err(e) => exit_for(&e),
    }
}
