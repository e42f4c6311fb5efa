//! `spbench`: benchmark harness measuring how strongly a recommender
//! retains old preferences (stability) and absorbs new ones
//! (plasticity) when retrained after an injected item-relabeling
//! shift. Stages: prepare -> shift -> split -> run -> report, plus a
//! synthetic data generator; `all` runs the pipeline end to end.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, ResolvedConfig};
use spbench_core::{Result, SpError};

#[derive(Parser)]
#[command(name = "spbench", version, about = "Stability/plasticity benchmark for recommender models")]
struct Cli {
    /// Experiment config file (TOML).
    #[arg(long, global = true, default_value = "spbench.toml")]
    config: PathBuf,

    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for evaluation (0 = all cores). Results do not
    /// depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Fraction of newest-period items to relabel, overriding the
    /// config.
    #[arg(long = "shift-fraction", global = true)]
    shift_fraction: Option<f64>,

    /// Exclude the pre-training period from both training sets.
    #[arg(long = "no-pretrain", global = true)]
    no_pretrain: bool,

    /// Persist the fitted models under <out>/models/.
    #[arg(long = "save-models", global = true)]
    save_models: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, threshold, and sample the raw data into the canonical
    /// dataset.
    Prepare,
    /// Build the item relabel map for the newest period.
    Shift,
    /// Write the five period files (pretrain, train/test per period).
    Split,
    /// Train both models per algorithm, evaluate, and write the
    /// report.
    Run,
    /// Re-render the derived report files from report.json.
    Report,
    /// Generate the bundled synthetic dataset at [data].path.
    Synth,
    /// prepare, shift, split, and run in one invocation.
    All,
}

/// Exit codes by failure class: 2 config, 3 data, 4 training, 5 io.
fn exit_code(err: &SpError) -> u8 {
    match err {
        SpError::Config(_) => 2,
        SpError::Parse { .. } | SpError::Data(_) | SpError::EmptyResult(_) => 3,
        SpError::Training { .. } => 4,
        SpError::Io { .. } | SpError::ModelFormat { .. } => 5,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| SpError::Config(format!("--jobs: {e}")))?;
    }
    let overrides = Overrides {
        master_seed: cli.seed,
        out_dir: cli.out.clone(),
        shift_fraction: cli.shift_fraction,
        no_pretrain: cli.no_pretrain,
    };
    let cfg = ResolvedConfig::load(&cli.config, &overrides)?;
    match cli.command {
        Command::Prepare => stages::stage_prepare(&cfg),
        Command::Shift => stages::stage_shift(&cfg),
        Command::Split => stages::stage_split(&cfg),
        Command::Run => stages::stage_run(&cfg, cli.save_models),
        Command::Report => stages::stage_report(&cfg),
        Command::Synth => stages::stage_synth(&cfg),
        Command::All => stages::stage_all(&cfg, cli.save_models),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
