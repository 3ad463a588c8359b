//! Slotted simulator for networks of intermittently-powered sensor nodes.
//!
//! Nodes harvest energy for `t` slots and are awake for one slot per cycle of
//! `t + 1`. The crate builds a least-hop routing tree towards an always-on
//! sink, synchronizes working slots between neighbours by scanning, and
//! forwards sensor readings with a pendulum-style offset swing. Baseline
//! forwarding strategies and the experiment harness used to compare them
//! live alongside.

pub mod baselines;
pub mod cli;
pub mod engine;
pub mod experiment;
pub mod export;
pub mod error;
pub mod forwarding;
pub mod frame;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod scenario;
pub mod slot;
pub mod sync;
pub mod topology;
pub mod trace;

pub use baselines::Strategy;
pub use engine::{run, FaultPlan, RunOutput, SimConfig};
pub use experiment::{run_experiment, ExperimentConfig, SinkPlacement};
pub use error::{ConfigError, ExperimentError, ExportError, ScenarioError, SimError};
pub use frame::{Frame, FrameKind, Hop, Message};
pub use metrics::MetricsRecord;
pub use radio::{Position, RadioConfig};
pub use scenario::{Area, Scenario, Shape, SINK};
pub use slot::{ChargingSpec, NodeId, SlotTime, WorkOffset};
