//! Command-line runner: reads a JSON experiment, runs it and writes CSV/JSON results.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::Parser;

pub use commands::{Job, Overrides, Plan};
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Clone, Parser)]
#[command(name = "mvsde", version, about = "Unbiased estimation of invariant measures of McKean-Vlasov SDEs")]
pub struct Cli {
    /// Experiment description (JSON).
    #[arg(long)]
    pub config: PathBuf,

    /// Master seed; overrides the config file.
    #[arg(long, env = "MV_SEED")]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,

    /// Output directory; overrides the config file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads and validates a config without writing anything.
pub fn plan(config_path: &Path, overrides: Overrides) -> CliResult<Plan> {
    let config = ExperimentConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    Plan::new(config, base, overrides)
}

pub fn run(cli: &Cli) -> CliResult<String> {
    let plan = plan(
        &cli.config,
        Overrides {
            seed: cli.seed,
            out: cli.out.clone(),
        },
    )?;
    match cli.threads {
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?
            .install(|| plan.execute()),
        None => plan.execute(),
    }
}
