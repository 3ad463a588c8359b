//! Unit-disk propagation with a sub-slot jitter collision rule.
//!
//! A listener decodes the in-range frame that starts strictly first. When two
//! or more in-range frames share the earliest start they destroy each other.
//! A node that transmits in a slot cannot decode in that slot.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::slot::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

pub fn within_range(a: Position, b: Position, range_m: f64) -> bool {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    // squared comparison keeps the 6-8-10 boundary exact
    dx * dx + dy * dy <= range_m * range_m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    /// Number of distinct sub-slot start positions.
    pub micro_slots: u32,
    pub ack_in_same_slot: bool,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            micro_slots: 16,
            ack_in_same_slot: true,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.micro_slots < 2 {
            return Err(ConfigError::Invalid(
                "micro_slots must be at least 2".into(),
            ));
        }
        if !self.ack_in_same_slot {
            return Err(ConfigError::Invalid(
                "only same-slot acknowledgements are supported".into(),
            ));
        }
        Ok(())
    }
}

/// One frame on the air, reduced to what the collision rule needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Airing {
    pub src: NodeId,
    pub pos: Position,
    pub jitter: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reception {
    /// Index into the airing list of the decoded frame.
    Decoded(usize),
    Collision,
    Silence,
    /// The listener itself was on the air.
    Transmitting,
}

/// Decode outcome for each listener, in listener order.
pub fn resolve_slot(
    airings: &[Airing],
    listeners: &[(NodeId, Position)],
    range_m: f64,
) -> Vec<Reception> {
    listeners
        .iter()
        .map(|&(id, pos)| {
            if airings.iter().any(|a| a.src == id) {
                return Reception::Transmitting;
            }
            let mut best: Option<(u32, usize)> = None;
            let mut tied = false;
            for (i, a) in airings.iter().enumerate() {
                if !within_range(a.pos, pos, range_m) {
                    continue;
                }
                match best {
                    None => best = Some((a.jitter, i)),
                    Some((j, _)) if a.jitter < j => {
                        best = Some((a.jitter, i));
                        tied = false;
                    }
                    Some((j, _)) if a.jitter == j => tied = true,
                    Some(_) => {}
                }
            }
            match best {
                None => Reception::Silence,
                Some(_) if tied => Reception::Collision,
                Some((_, i)) => Reception::Decoded(i),
            }
        })
        .collect()
}
