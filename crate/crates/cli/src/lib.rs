//! Driver for the `modeheat` command line: configs, experiments and run outputs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::{Outcome, Verdict};

/// Command-line overrides of a config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub directory: PathBuf,
    pub written: Vec<PathBuf>,
}

pub fn schema() -> &'static str {
    include_str!("../../../docs/config.schema.json")
}

/// Parses, runs and writes one experiment.
pub fn run_config(text: &str, options: &RunOptions) -> Result<RunReport, CliError> {
    let mut config = ExperimentConfig::from_json(text)?;
    if let Some(seed) = options.seed {
        config.sim.seed = seed;
    }
    if let Some(dir) = &options.out {
        config.output.directory = dir.clone();
    }
    let threads = match options.threads {
        Some(0) => return Err(CliError::Config("--threads must be ≥ 1".into())),
        Some(n) => n,
        None => rayon::current_num_threads(),
    };
    let directory = config.output.directory.clone();
    output::prepare_directory(&directory)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| experiments::run_experiment(&config))?;
    let info = output::RunInfo {
        config: &config,
        source_sha256: Some(output::sha256_hex(text.as_bytes())),
        threads,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    let written = output::write_outcome(&directory, &outcome, &info)?;
    Ok(RunReport { outcome, directory, written })
}

pub fn run_path(path: &Path, options: &RunOptions) -> Result<RunReport, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    run_config(&text, options)
}
