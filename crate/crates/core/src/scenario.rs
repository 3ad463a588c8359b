//! Immutable world description consumed by the simulator.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ScenarioError};
use crate::radio::{within_range, Position};
use crate::slot::{ChargingSpec, NodeId, WorkOffset};

/// The sink always occupies index 0 of the node table.
pub const SINK: NodeId = NodeId(0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Rectangle,
    Custom,
}

impl Shape {
    pub fn as_str(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Rectangle => "rectangle",
            Shape::Custom => "custom",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Shape::Square),
            "rectangle" | "rect" => Ok(Shape::Rectangle),
            other => Err(ConfigError::UnknownShape(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
    pub shape: Shape,
}

impl Area {
    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub pos: Position,
    pub initial_offset: WorkOffset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Node table; entry 0 is the sink.
    pub nodes: Vec<NodeSpec>,
    pub spec: ChargingSpec,
    pub range_m: f64,
    pub seed: u64,
    pub area: Area,
}

impl Scenario {
    /// Builds a scenario without checking connectivity. Offsets are validated.
    pub fn new(
        spec: ChargingSpec,
        range_m: f64,
        area: Area,
        sink_pos: Position,
        nodes: &[(Position, u32)],
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        if !(range_m > 0.0 && range_m.is_finite()) {
            return Err(ConfigError::Invalid(format!("range {range_m} m must be positive")).into());
        }
        let mut table = Vec::with_capacity(nodes.len() + 1);
        table.push(NodeSpec {
            id: SINK,
            pos: sink_pos,
            initial_offset: WorkOffset::new(0, spec)?,
        });
        for (i, &(pos, offset)) in nodes.iter().enumerate() {
            table.push(NodeSpec {
                id: NodeId(i as u32 + 1),
                pos,
                initial_offset: WorkOffset::new(offset, spec)?,
            });
        }
        for n in &table {
            if !(n.pos.x.is_finite() && n.pos.y.is_finite()) || !area.contains(n.pos) {
                return Err(ScenarioError::OutOfArea(n.id.0));
            }
        }
        Ok(Self {
            nodes: table,
            spec,
            range_m,
            seed,
            area,
        })
    }

    pub fn sink(&self) -> NodeId {
        SINK
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of intermittently-powered nodes.
    pub fn sensor_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn in_range(&self, a: NodeId, b: NodeId) -> bool {
        within_range(self.node(a).pos, self.node(b).pos, self.range_m)
    }

    /// Unit-disk adjacency lists, ascending by id.
    pub fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                if within_range(self.nodes[i].pos, self.nodes[j].pos, self.range_m) {
                    adj[i].push(NodeId(j as u32));
                    adj[j].push(NodeId(i as u32));
                }
            }
        }
        adj
    }

    /// Number of nodes that cannot reach the sink.
    pub fn unreachable_count(&self) -> usize {
        let adj = self.adjacency();
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([SINK]);
        seen[SINK.index()] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u.index()] {
                if !seen[v.index()] {
                    seen[v.index()] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().filter(|s| !**s).count()
    }

    pub fn is_connected(&self) -> bool {
        self.unreachable_count() == 0
    }

    /// Checks every invariant, including connectivity to the sink.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let unreached = self.unreachable_count();
        if unreached > 0 {
            return Err(ScenarioError::Disconnected { unreached });
        }
        Ok(())
    }
}
