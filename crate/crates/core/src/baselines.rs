//! Forwarding strategies compared against each other.
//!
//! All four share the sender and receiver machinery in [`crate::forwarding`];
//! they differ only in how the next hop is picked, whether the synchronized
//! offset is cached, and what a sender does after losing its next hop.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::rng::Stream;
use crate::slot::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Pendulum sync toward the topology next hop with offset caching.
    #[default]
    Rics,
    /// Fixed topology next hop, fresh scan for every batch.
    Fxcs,
    /// Random lower-hop neighbour per batch, fresh scan for every batch.
    Rncs,
    /// Pendulum caching that re-matches with any lower-hop node on failure.
    Otps,
}

/// What a sender does once its next hop stops answering.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureResponse {
    /// Listen for the recovery wait, then scan for any lower-hop node.
    RecoveryWait,
    /// Scan for any lower-hop node right away.
    ProbeAny,
    /// Give up the batch; the next batch scans toward the same fixed hop.
    RetryFixed,
    /// Give up the batch; the next batch draws a new random next hop.
    Redraw,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Rics, Strategy::Fxcs, Strategy::Rncs, Strategy::Otps];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rics => "rics",
            Strategy::Fxcs => "fxcs",
            Strategy::Rncs => "rncs",
            Strategy::Otps => "otps",
        }
    }

    pub fn caches_offsets(self) -> bool {
        matches!(self, Strategy::Rics | Strategy::Otps)
    }

    pub fn on_failure(self) -> FailureResponse {
        match self {
            Strategy::Rics => FailureResponse::RecoveryWait,
            Strategy::Otps => FailureResponse::ProbeAny,
            Strategy::Fxcs => FailureResponse::RetryFixed,
            Strategy::Rncs => FailureResponse::Redraw,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rics" => Ok(Strategy::Rics),
            "fxcs" => Ok(Strategy::Fxcs),
            "rncs" => Ok(Strategy::Rncs),
            "otps" => Ok(Strategy::Otps),
            other => Err(ConfigError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Uniform draw among known neighbours whose hop count is below `self_hop`.
/// Returns `None` when the node has no such neighbour.
pub fn rncs_next_hop(neighbors: &[(NodeId, u32)], self_hop: u32, rng: &mut Stream) -> Option<NodeId> {
    let eligible: Vec<NodeId> = neighbors
        .iter()
        .filter(|(_, h)| *h < self_hop)
        .map(|(id, _)| *id)
        .collect();
    eligible.choose(rng).copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng_stream, Purpose};

    #[test]
    fn parses_tags() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("RICS".parse::<Strategy>().unwrap(), Strategy::Rics);
        assert!(matches!(
            "bogus".parse::<Strategy>(),
            Err(ConfigError::UnknownStrategy(_))
        ));
    }

    #[test]
    fn rncs_filters_by_hop() {
        let mut rng = derive_rng_stream(3, NodeId(1), Purpose::NextHop);
        let n = [(NodeId(10), 1), (NodeId(11), 1), (NodeId(12), 3)];
        let mut seen = [0usize; 2];
        for _ in 0..2000 {
            match rncs_next_hop(&n, 2, &mut rng) {
                Some(NodeId(10)) => seen[0] += 1,
                Some(NodeId(11)) => seen[1] += 1,
                other => panic!("drew {other:?}"),
            }
        }
        // both candidates drawn roughly equally often
        assert!(seen.iter().all(|&c| (850..=1150).contains(&c)), "{seen:?}");
    }

    #[test]
    fn rncs_single_and_empty() {
        let mut rng = derive_rng_stream(3, NodeId(1), Purpose::NextHop);
        assert_eq!(rncs_next_hop(&[(NodeId(4), 0)], 1, &mut rng), Some(NodeId(4)));
        assert_eq!(rncs_next_hop(&[(NodeId(4), 2)], 1, &mut rng), None);
    }
}
