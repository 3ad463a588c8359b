//! Command-line front end. The binary is a thin wrapper around [`run_cli`].

use std::fs;
use std::path::PathBuf;

use clap::Parser;

use crate::baselines::Strategy;
use crate::error::{ConfigError, ExperimentError, ExportError};
use crate::experiment::{run_experiment, seed_sweep, ExperimentConfig};
use crate::export::{export_run, write_atomic, write_sync_csv, RunSummary};
use crate::scenario::Shape;
use crate::slot::ChargingSpec;
use crate::sync::{best_geometric_p, run_sync_bench};

pub const SYNC_TRIALS: usize = 10_000;
pub const SYNC_BENCH_T: [u32; 3] = [5, 120, 500];

#[derive(Debug, Parser)]
#[command(name = "icnet", version, about = "Simulate routing over intermittently-powered sensor networks")]
pub struct Cli {
    /// JSON file with experiment keys; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub shape: Option<Shape>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Charging slots per cycle.
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Messages each node creates, one per cycle.
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub slot_ms: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Also write a JSONL event trace per run.
    #[arg(long)]
    pub trace: bool,
    /// Run this many seeds starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub repeat: u64,
    /// Compare scan and randomized sync latency instead of running the network.
    #[arg(long)]
    pub sync_bench: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config {path}: {source}")]
    ParseConfig {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("seed {seed}: {source}")]
    Run {
        seed: u64,
        #[source]
        source: ExperimentError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

impl Cli {
    /// Config file, then flags.
    pub fn experiment_config(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|source| CliError::ParseConfig {
                    path: path.clone(),
                    source,
                })?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.shape {
            cfg.shape = v;
        }
        if let Some(v) = self.nodes {
            cfg.nodes = v;
        }
        if let Some(v) = self.t {
            cfg.t = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.rounds {
            cfg.rounds = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.slot_ms {
            cfg.slot_ms = v;
        }
        cfg.trace |= self.trace;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the command and returns the lines it would print.
pub fn run_cli(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = cli.experiment_config()?;
    if cli.sync_bench {
        return sync_bench(cli, &cfg);
    }
    let runs = if cli.repeat <= 1 {
        vec![run_experiment(&cfg)]
    } else {
        seed_sweep(&cfg, cli.repeat)
    };
    let mut lines = Vec::with_capacity(runs.len());
    for (i, run) in runs.into_iter().enumerate() {
        let run = run.map_err(|source| CliError::Run {
            seed: cfg.seed + i as u64,
            source,
        })?;
        export_run(&run, &cli.out)?;
        lines.push(RunSummary::new(&run.config, &run.output.metrics).one_line());
    }
    Ok(lines)
}

fn sync_bench(cli: &Cli, cfg: &ExperimentConfig) -> Result<Vec<String>, CliError> {
    let ts: Vec<u32> = match cli.t {
        Some(t) => vec![t],
        None => SYNC_BENCH_T.to_vec(),
    };
    let mut benches = Vec::with_capacity(ts.len());
    let mut lines = Vec::with_capacity(ts.len());
    for t in ts {
        let spec = ChargingSpec::new(t)?;
        let p = best_geometric_p(spec, SYNC_TRIALS / 10, cfg.seed);
        let b = run_sync_bench(spec, SYNC_TRIALS, p, cfg.seed);
        lines.push(format!(
            "t={} scan mean={:.1} max={} | geometric p={:.1} mean={:.1} var={:.0} censored={} (slots)",
            t, b.scan.mean, b.scan.max, p, b.geometric.mean, b.geometric.variance, b.geometric.censored
        ));
        benches.push(b);
    }
    fs::create_dir_all(&cli.out).map_err(|source| ExportError::Io {
        path: cli.out.clone(),
        source,
    })?;
    let path = cli.out.join(format!("sync_s{}.csv", cfg.seed));
    write_atomic(&path, |w| write_sync_csv(&benches, w))?;
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"t": 5, "nodes": 20, "strategy": "fxcs"}"#).unwrap();
        let cli = Cli::try_parse_from([
            "icnet",
            "--config",
            path.to_str().unwrap(),
            "--nodes",
            "30",
        ])
        .unwrap();
        let cfg = cli.experiment_config().unwrap();
        assert_eq!((cfg.t, cfg.nodes, cfg.strategy), (5, 30, Strategy::Fxcs));
    }

    #[test]
    fn bogus_strategy_is_a_usage_error() {
        assert!(Cli::try_parse_from(["icnet", "--strategy", "bogus"]).is_err());
    }

    #[test]
    fn zero_t_is_rejected() {
        let cli = Cli::try_parse_from(["icnet", "--t", "0"]).unwrap();
        assert!(cli.experiment_config().is_err());
    }
}
