use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "RESETQ_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analytic,
    Oracle,
    Simulate,
    Waiting,
    Wh,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One flat schema shared by every subcommand and by `--config` files.
/// Fields a command does not use are ignored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[command(allow_negative_numbers = true)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[arg(skip)]
    pub command: Option<Command>,

    /// Markovian model: mminf, mmr, mm1, mm1m or clearing.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Service rate (defaults to 1; 0 for the clearing model).
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Abandonment rate of M/M/1+M (defaults to 1).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Number of servers for mmr and ggr.
    #[arg(long)]
    pub r: Option<usize>,

    /// Last state written; without it the truncation is chosen from `eps`.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Tail-mass tolerance of truncations and of the series solver.
    #[arg(long)]
    pub eps: Option<f64>,

    /// Simulated time (CTMC).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Discarded prefix: simulated time for CTMC, steps for recursions.
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub batches: Option<usize>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Number of recursion steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,

    /// Workload recursion: gg1, ggr or gginf.
    #[arg(long)]
    pub kind: Option<String>,
    /// Interarrival law, e.g. `exp:1`.
    #[arg(long)]
    pub u: Option<String>,
    /// Service law, e.g. `uniform:0,2`.
    #[arg(long)]
    pub v: Option<String>,
    /// Increment law for `wh` when `u`, `v` are not given.
    #[arg(long)]
    pub x: Option<String>,
    /// Reset probability per arrival.
    #[arg(long)]
    pub q: Option<f64>,
    /// Grid step of the Wiener-Hopf solver.
    #[arg(long)]
    pub h: Option<f64>,
    /// Right end of the Wiener-Hopf grid.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of evenly spaced ECDF points written by `waiting`.
    #[arg(long)]
    pub points: Option<usize>,

    /// Parameter grid for `verify` (`standard`).
    #[arg(long)]
    pub grid: Option<String>,
    /// Arrival rates visited by `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Reset rates visited by `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,

    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// JSON file with defaults for any of the fields above.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "resetq", version, about = "Queues with random resetting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Closed-form stationary law of a Markovian model.
    Analytic(RunConfig),
    /// Stationary law from a dense linear solve of the truncated generator.
    Oracle(RunConfig),
    /// Continuous-time Markov chain simulation.
    Simulate(RunConfig),
    /// Workload recursion simulation.
    Waiting(RunConfig),
    /// Waiting-time law from the Wiener-Hopf operator series.
    Wh(RunConfig),
    /// Invariant suite over a parameter grid.
    Verify(RunConfig),
    /// Closed-form summaries over a grid of arrival and reset rates.
    Sweep(RunConfig),
}

impl CliCommand {
    pub fn into_parts(self) -> (Command, RunConfig) {
        match self {
            CliCommand::Analytic(c) => (Command::Analytic, c),
            CliCommand::Oracle(c) => (Command::Oracle, c),
            CliCommand::Simulate(c) => (Command::Simulate, c),
            CliCommand::Waiting(c) => (Command::Waiting, c),
            CliCommand::Wh(c) => (Command::Wh, c),
            CliCommand::Verify(c) => (Command::Verify, c),
            CliCommand::Sweep(c) => (Command::Sweep, c),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn overlay(&self, base: &RunConfig) -> Result<RunConfig, CliError> {
        let mut merged = serde_json::to_value(base).map_err(|e| CliError::Config(e.to_string()))?;
        let top = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        if let (Value::Object(m), Value::Object(t)) = (&mut merged, top) {
            for (k, v) in t {
                if !v.is_null() {
                    m.insert(k, v);
                }
            }
        }
        serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Combines the flags of `command` with the `--config` file, if any, and
    /// fills the seed from the environment when neither sets it.
    pub fn resolve(self, command: Command) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => self.overlay(&RunConfig::from_file(path)?)?,
            None => self,
        };
        if let Some(c) = cfg.command {
            if c != command {
                return Err(CliError::param(
                    "command",
                    format!("config file is for `{c:?}`, invoked as `{command:?}`"),
                ));
            }
        }
        cfg.command = Some(command);
        if cfg.seed.is_none() {
            if let Ok(s) = std::env::var(SEED_ENV) {
                let seed = s
                    .trim()
                    .parse()
                    .map_err(|_| CliError::param("seed", format!("{SEED_ENV}=`{s}` is not a u64")))?;
                cfg.seed = Some(seed);
            }
        }
        Ok(cfg)
    }
}
