//! Optional structured event log of a run.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::slot::{NodeId, SlotTime};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceKind {
    HopTx { hop: u32, round: u32 },
    HopUpdate { hop: u32, via: NodeId },
    ProbeTx { attempt: u32 },
    Settled { hop: Option<u32> },
    Unreachable,
    Generated { msg: u64 },
    QueueDrop { msg: u64 },
    DataTx {
        msg: u64,
        dst: Option<NodeId>,
        is_start: bool,
        is_end: bool,
        offset_forth: u32,
    },
    DataRx { msg: u64, from: NodeId, accepted: bool },
    StaleDrop { msg: u64 },
    Collision,
    ScanStep { target: Option<NodeId>, offset_forth: u32 },
    Matched { next: NodeId, offset_forth: u32, scanned: bool },
    /// A full scan found nobody; the sender went back to listening.
    ScanExhausted,
    Failure { next: Option<NodeId> },
    RecoveryDone,
    Delivered { msg: u64, hops: u32 },
    Killed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub slot: SlotTime,
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: TraceKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTrace {
    pub events: Vec<TraceEvent>,
}

impl EventTrace {
    pub fn push(&mut self, slot: SlotTime, node: NodeId, kind: TraceKind) {
        self.events.push(TraceEvent { slot, node, kind });
    }

    pub fn for_node(&self, node: NodeId) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.node == node)
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
