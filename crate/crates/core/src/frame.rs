//! On-air frames and the data messages they carry.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::slot::{ChargingSpec, NodeId, SlotTime};

/// Hop distance to the sink. `None` stands for infinity.
pub type Hop = Option<u32>;

/// Sensor reading travelling towards the sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub origin: NodeId,
    pub seq: u32,
    pub created_at: SlotTime,
    /// Nodes that have held this message, origin first.
    pub path: Vec<NodeId>,
}

impl Message {
    pub fn key(&self) -> (NodeId, u32) {
        (self.origin, self.seq)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataFrame {
    pub message: Message,
    pub is_start: bool,
    pub is_end: bool,
    /// Hop count of the transmitting node.
    pub src_hop: u32,
    /// The sender's chosen next hop; `None` while it is still searching.
    pub src_id_next: Option<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameKind {
    HopCount { hop: u32, round: u32 },
    Data(DataFrame),
    /// `hop` is the acknowledging node's hop count when it has one.
    Ack { ack_dst: NodeId, hop: Hop },
    /// Fallback probe from a node that never heard a hop count.
    Probe,
}

impl FrameKind {
    pub fn label(&self) -> &'static str {
        match self {
            FrameKind::HopCount { .. } => "hop",
            FrameKind::Data(_) => "data",
            FrameKind::Ack { .. } => "ack",
            FrameKind::Probe => "probe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub src: NodeId,
    pub dst: Option<NodeId>,
    pub kind: FrameKind,
    /// Micro-slot at which the transmission starts inside the slot.
    pub jitter: u32,
}

impl Frame {
    pub fn hop_count(
        src: NodeId,
        hop: u32,
        round: u32,
        spec: ChargingSpec,
        jitter: u32,
    ) -> Result<Self, ConfigError> {
        if round > spec.t() {
            return Err(ConfigError::Invalid(format!(
                "hop-count round {round} outside [0, {}]",
                spec.t()
            )));
        }
        Ok(Frame {
            src,
            dst: None,
            kind: FrameKind::HopCount { hop, round },
            jitter,
        })
    }

    pub fn data(src: NodeId, dst: Option<NodeId>, data: DataFrame, jitter: u32) -> Self {
        Frame {
            src,
            dst,
            kind: FrameKind::Data(data),
            jitter,
        }
    }

    pub fn ack(src: NodeId, ack_dst: NodeId, hop: Hop, jitter: u32) -> Self {
        Frame {
            src,
            dst: Some(ack_dst),
            kind: FrameKind::Ack { ack_dst, hop },
            jitter,
        }
    }

    pub fn probe(src: NodeId, jitter: u32) -> Self {
        Frame {
            src,
            dst: None,
            kind: FrameKind::Probe,
            jitter,
        }
    }
}
