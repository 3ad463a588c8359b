//! Scenario generation and experiment runs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Strategy;
use crate::engine::{self, FaultPlan, RunOutput, SimConfig};
use crate::error::{ConfigError, ExperimentError, ScenarioError};
use crate::forwarding::ForwardingParams;
use crate::radio::{Position, RadioConfig};
use crate::rng::{derive_rng_stream, Purpose};
use crate::scenario::{Area, Scenario, Shape, SINK};
use crate::slot::ChargingSpec;
use crate::topology::TopoParams;

pub const MAX_PLACEMENT_ATTEMPTS: u32 = 1000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkPlacement {
    /// Middle of the left edge, which is a shorter edge for rectangles.
    #[default]
    EdgeMidpoint,
    Center,
}

impl SinkPlacement {
    pub fn position(self, area: &Area) -> Position {
        match self {
            SinkPlacement::EdgeMidpoint => Position::new(0.0, area.height / 2.0),
            SinkPlacement::Center => Position::new(area.width / 2.0, area.height / 2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub shape: Shape,
    /// Sensor nodes, sink excluded.
    pub nodes: usize,
    /// Area size for `Shape::Custom`, in metres.
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub t: u32,
    pub strategy: Strategy,
    pub rounds: u32,
    pub seed: u64,
    pub slot_ms: f64,
    pub range_m: f64,
    pub sink: SinkPlacement,
    pub params: ForwardingParams,
    pub radio: RadioConfig,
    pub topo: Option<TopoParams>,
    pub horizon_cycles: u64,
    pub trace: bool,
    pub faults: FaultPlan,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            shape: Shape::Square,
            nodes: 50,
            width: None,
            height: None,
            t: 50,
            strategy: Strategy::Rics,
            rounds: 2,
            seed: 7,
            slot_ms: 1.0,
            range_m: 10.0,
            sink: SinkPlacement::EdgeMidpoint,
            params: ForwardingParams::default(),
            radio: RadioConfig::default(),
            topo: None,
            horizon_cycles: 20_000,
            trace: false,
            faults: FaultPlan::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn spec(&self) -> Result<ChargingSpec, ConfigError> {
        ChargingSpec::new(self.t)
    }

    pub fn area(&self) -> Result<Area, ConfigError> {
        let (width, height) = match self.shape {
            Shape::Square => (45.0, 45.0),
            Shape::Rectangle => (80.0, 40.0),
            Shape::Custom => match (self.width, self.height) {
                (Some(w), Some(h)) if w > 0.0 && h > 0.0 => (w, h),
                _ => {
                    return Err(ConfigError::Invalid(
                        "custom shape needs positive width and height".into(),
                    ))
                }
            },
        };
        Ok(Area {
            width,
            height,
            shape: self.shape,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.spec()?;
        self.area()?;
        if !(self.slot_ms > 0.0 && self.slot_ms.is_finite()) {
            return Err(ConfigError::Invalid("slot_ms must be positive".into()));
        }
        self.sim_config().validate()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            strategy: self.strategy,
            forwarding: self.params,
            topo: self.topo,
            radio: self.radio,
            rounds: self.rounds,
            horizon_cycles: self.horizon_cycles,
            trace: self.trace,
            faults: self.faults.clone(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_strategy(&self, strategy: Strategy) -> Self {
        Self {
            strategy,
            ..self.clone()
        }
    }
}

/// Uniform random placement, retried until every node reaches the sink.
pub fn generate_scenario(cfg: &ExperimentConfig) -> Result<Scenario, ScenarioError> {
    let spec = cfg.spec()?;
    let area = cfg.area()?;
    let sink = cfg.sink.position(&area);
    let mut rng = derive_rng_stream(cfg.seed, SINK, Purpose::Scenario);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let nodes: Vec<(Position, u32)> = (0..cfg.nodes)
            .map(|_| {
                let p = Position::new(
                    rng.gen_range(0.0..=area.width),
                    rng.gen_range(0.0..=area.height),
                );
                (p, rng.gen_range(0..=spec.t()))
            })
            .collect();
        let scenario = Scenario::new(spec, cfg.range_m, area, sink, &nodes, cfg.seed)?;
        if scenario.is_connected() {
            return Ok(scenario);
        }
    }
    let density = (cfg.nodes + 1) as f64 / (area.width * area.height);
    Err(ScenarioError::TooSparse {
        attempts: MAX_PLACEMENT_ATTEMPTS,
        nodes: cfg.nodes,
        width: area.width,
        height: area.height,
        range_m: cfg.range_m,
        density,
        expected_degree: density * std::f64::consts::PI * cfg.range_m * cfg.range_m,
    })
}

/// Creation slots of one node: its working slot in `rounds` consecutive
/// cycles starting at `first_cycle`.
pub fn message_workload(
    base_offset: u32,
    first_cycle: u64,
    rounds: u32,
    spec: ChargingSpec,
) -> Vec<u64> {
    (0..rounds as u64)
        .map(|r| (first_cycle + r) * spec.cycle_len() + base_offset as u64)
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub scenario: Scenario,
    pub output: RunOutput,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun, ExperimentError> {
    cfg.validate()?;
    let scenario = generate_scenario(cfg)?;
    let output = engine::run(&scenario, cfg.sim_config())?;
    Ok(ExperimentRun {
        config: cfg.clone(),
        scenario,
        output,
    })
}

/// Runs seeds `base.seed .. base.seed + count` in parallel, in seed order.
pub fn seed_sweep(base: &ExperimentConfig, count: u64) -> Vec<Result<ExperimentRun, ExperimentError>> {
    (0..count)
        .into_par_iter()
        .map(|i| run_experiment(&base.with_seed(base.seed + i)))
        .collect()
}
