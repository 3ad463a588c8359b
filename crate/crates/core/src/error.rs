use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::slot::SlotTime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown strategy `{0}` (expected one of rics, fxcs, rncs, otps)")]
    UnknownStrategy(String),
    #[error("unknown shape `{0}` (expected square or rectangle)")]
    UnknownShape(String),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(
        "area too sparse: {attempts} placements of {nodes} nodes in {width}x{height} m \
         with range {range_m} m never connected to the sink \
         (density {density:.4} nodes/m^2, expected degree {expected_degree:.2})"
    )]
    TooSparse {
        attempts: u32,
        nodes: usize,
        width: f64,
        height: f64,
        range_m: f64,
        density: f64,
        expected_degree: f64,
    },
    #[error("node {0} lies outside the declared area")]
    OutOfArea(u32),
    #[error("scenario graph is not connected to the sink ({unreached} nodes unreachable)")]
    Disconnected { unreached: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("topology construction did not converge within {max_slots} slots ({pending} nodes pending)")]
    DidNotConverge { max_slots: SlotTime, pending: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Export(#[from] ExportError),
}
