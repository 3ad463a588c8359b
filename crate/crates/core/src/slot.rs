//! Slot-time arithmetic shared by every protocol layer.
//!
//! Every node charges for `t` slots and then works for exactly one slot, so a
//! charging cycle is `t + 1` slots long. Slots are globally aligned; a node is
//! awake in slot `s` iff `s mod (t + 1)` equals its current working offset.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::ConfigError;

/// Dense node index into a scenario's node table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Global slot counter since system start.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SlotTime(pub u64);

impl SlotTime {
    pub const ZERO: SlotTime = SlotTime(0);

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn after(self, slots: u64) -> SlotTime {
        SlotTime(self.0 + slots)
    }

    /// Index of the charging cycle containing this slot.
    pub fn cycle(self, spec: ChargingSpec) -> u64 {
        self.0 / spec.cycle_len()
    }

    /// Position of this slot inside its charging cycle.
    pub fn phase(self, spec: ChargingSpec) -> u32 {
        (self.0 % spec.cycle_len()) as u32
    }
}

impl fmt::Display for SlotTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Charging time shared by all nodes of a scenario.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ChargingSpec {
    t: u32,
}

impl ChargingSpec {
    pub fn new(t: u32) -> Result<Self, ConfigError> {
        if t == 0 {
            return Err(ConfigError::Invalid("charging time t must be at least 1".into()));
        }
        Ok(Self { t })
    }

    /// Charging time in slots.
    pub fn t(self) -> u32 {
        self.t
    }

    pub fn cycle_len(self) -> u64 {
        cycle_length(self)
    }
}

impl TryFrom<u32> for ChargingSpec {
    type Error = ConfigError;
    fn try_from(t: u32) -> Result<Self, Self::Error> {
        ChargingSpec::new(t)
    }
}

impl From<ChargingSpec> for u32 {
    fn from(spec: ChargingSpec) -> u32 {
        spec.t
    }
}

/// Slot position of a node's working period inside a cycle, in `[0, t]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkOffset(u32);

impl WorkOffset {
    pub fn new(value: u32, spec: ChargingSpec) -> Result<Self, ConfigError> {
        if value > spec.t() {
            return Err(ConfigError::Invalid(format!(
                "offset {value} outside [0, {}]",
                spec.t()
            )));
        }
        Ok(Self(value))
    }

    /// Reduces an arbitrary value modulo the cycle length.
    pub fn wrapping(value: u64, spec: ChargingSpec) -> Self {
        Self((value % spec.cycle_len()) as u32)
    }

    pub fn value(self) -> u32 {
        self.0
    }

    /// First slot at or after `from` in which a node at this offset is awake.
    pub fn next_slot_from(self, from: SlotTime, spec: ChargingSpec) -> SlotTime {
        let cyc = spec.cycle_len();
        let base = from.0 - from.0 % cyc + self.0 as u64;
        if base >= from.0 {
            SlotTime(base)
        } else {
            SlotTime(base + cyc)
        }
    }

    /// Slot of this offset within the given cycle.
    pub fn slot_in_cycle(self, cycle: u64, spec: ChargingSpec) -> SlotTime {
        SlotTime(cycle * spec.cycle_len() + self.0 as u64)
    }
}

impl fmt::Display for WorkOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "+{}", self.0)
    }
}

pub fn cycle_length(spec: ChargingSpec) -> u64 {
    spec.t as u64 + 1
}

pub fn is_working(offset: WorkOffset, spec: ChargingSpec, now: SlotTime) -> bool {
    now.0 % spec.cycle_len() == offset.0 as u64
}

/// Delays a working time by one slot, wrapping inside the cycle.
pub fn delay_offset(offset: WorkOffset, spec: ChargingSpec) -> WorkOffset {
    WorkOffset::wrapping(offset.0 as u64 + 1, spec)
}
