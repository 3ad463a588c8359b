//! Pendulum-sync message forwarding.
//!
//! A node alternates between a receiver role at its base working offset and
//! a sender role in which it swings its working slot forth by a cached
//! offset to meet its next hop, sends, and swings back afterwards.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::frame::{DataFrame, Message};
use crate::slot::{ChargingSpec, NodeId, WorkOffset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardingParams {
    /// Queue length at which an unlocked receiver turns sender.
    pub threshold: usize,
    pub q_max: usize,
    /// Tolerance wait added to failure recovery; `None` means `t + 1`.
    pub delta: Option<u64>,
    /// Consecutive misses toward a matched next hop before an opportunistic
    /// sender re-probes. One miss by default; `None` means `t + 1`, the
    /// same limit the other strategies use.
    pub probe_after: Option<u32>,
    /// Consecutive full scans without any ack before the sender treats its
    /// next hop as lost.
    pub scan_limit: u32,
}

impl Default for ForwardingParams {
    fn default() -> Self {
        Self {
            threshold: 1,
            q_max: 16,
            delta: None,
            probe_after: Some(1),
            scan_limit: 5,
        }
    }
}

impl ForwardingParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scan_limit == 0 {
            return Err(ConfigError::Invalid("scan_limit must be at least 1".into()));
        }
        if self.threshold == 0 || self.threshold > self.q_max {
            return Err(ConfigError::Invalid(format!(
                "need 1 <= TH ({}) <= q_max ({})",
                self.threshold, self.q_max
            )));
        }
        Ok(())
    }

    /// Consecutive matched misses that count as losing the next hop.
    pub fn miss_limit(&self, spec: ChargingSpec, opportunistic: bool) -> u32 {
        match (opportunistic, self.probe_after) {
            (true, Some(n)) => n.max(1),
            _ => spec.t() + 1,
        }
    }

    pub fn delta(&self, spec: ChargingSpec) -> u64 {
        self.delta.unwrap_or(spec.cycle_len())
    }
}

/// Wait before a sender that lost its next hop searches again.
pub fn failure_recovery_wait(spec: ChargingSpec, params: &ForwardingParams) -> u64 {
    spec.cycle_len() * params.q_max as u64 + params.delta(spec)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Swing {
    Forth,
    Back,
}

/// Working offset after swinging from `base` by `cached`.
///
/// Swinging forth lands on `base + cached`; swinging back from there applies
/// `(t + 1) - cached` and lands on `base` again.
pub fn swing(base: WorkOffset, cached: u32, direction: Swing, spec: ChargingSpec) -> WorkOffset {
    let forth = base.value() as u64 + cached as u64;
    match direction {
        Swing::Forth => WorkOffset::wrapping(forth, spec),
        Swing::Back => WorkOffset::wrapping(forth + offset_back(cached, spec) as u64, spec),
    }
}

pub fn offset_back(offset_forth: u32, spec: ChargingSpec) -> u32 {
    (spec.t() + 1 - offset_forth % (spec.t() + 1)) % (spec.t() + 1)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueuedMessage {
    pub message: Message,
    /// Upstream node the message came from; `None` for own readings.
    pub from: Option<NodeId>,
    /// Received while the upstream sender had not chosen a next hop yet.
    pub unaddressed: bool,
}

/// Bounded FIFO sending queue.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MessageQueue {
    items: VecDeque<QueuedMessage>,
    cap: usize,
}

impl MessageQueue {
    pub fn new(cap: usize) -> Self {
        Self {
            items: VecDeque::new(),
            cap,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() >= self.cap
    }

    pub fn contains(&self, key: (NodeId, u32)) -> bool {
        self.items.iter().any(|q| q.message.key() == key)
    }

    /// Appends unless full; returns whether the message was stored.
    pub fn push(&mut self, item: QueuedMessage) -> bool {
        if self.is_full() {
            return false;
        }
        self.items.push_back(item);
        true
    }

    /// Puts an unacknowledged message back at the head for the next attempt.
    pub fn push_front(&mut self, item: QueuedMessage) {
        self.items.push_front(item);
    }

    pub fn pop(&mut self) -> Option<QueuedMessage> {
        self.items.pop_front()
    }

    /// Drops the newest unaddressed message received from `from`.
    pub fn pop_stale_from(&mut self, from: NodeId) -> Option<QueuedMessage> {
        let idx = self
            .items
            .iter()
            .rposition(|q| q.from == Some(from) && q.unaddressed)?;
        self.items.remove(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueuedMessage> {
        self.items.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SenderState {
    /// Failed unmatched attempts in the current scan.
    pub attempt_send: u32,
    pub flag_match: bool,
    pub id_next: Option<NodeId>,
    pub offset_forth: u32,
    pub offset_back: u32,
    /// Queue size when the current batch started.
    pub max_messages: usize,
    /// Messages acknowledged in the current batch.
    pub batch_acked: usize,
    /// Consecutive failed attempts while matched.
    pub matched_misses: u32,
}

impl SenderState {
    /// Unmatched sender that scans from its base offset towards `target`
    /// (`None` accepts any lower-hop receiver).
    pub fn scanning(target: Option<NodeId>, queue_len: usize) -> Self {
        Self {
            attempt_send: 0,
            flag_match: false,
            id_next: target,
            offset_forth: 0,
            offset_back: 0,
            max_messages: queue_len,
            batch_acked: 0,
            matched_misses: 0,
        }
    }

    /// Sender reusing a cached offset; no scan is needed.
    pub fn cached(target: NodeId, offset_forth: u32, queue_len: usize, spec: ChargingSpec) -> Self {
        Self {
            flag_match: true,
            id_next: Some(target),
            offset_forth,
            offset_back: offset_back(offset_forth, spec),
            ..Self::scanning(Some(target), queue_len)
        }
    }

    pub fn current_offset(&self, base: WorkOffset, spec: ChargingSpec) -> WorkOffset {
        swing(base, self.offset_forth, Swing::Forth, spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ListenReason {
    QueueEmpty,
    AttemptsExhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub item: QueuedMessage,
    pub dst: Option<NodeId>,
    pub is_start: bool,
    pub is_end: bool,
}

impl Outgoing {
    pub fn data_frame(&self, src_hop: u32) -> DataFrame {
        DataFrame {
            message: self.item.message.clone(),
            is_start: self.is_start,
            is_end: self.is_end,
            src_hop,
            src_id_next: self.dst,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SenderAction {
    Transmit(Outgoing),
    /// Swing back to the base offset and listen.
    ReturnToListening(ListenReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttemptOutcome {
    Delivered { to: NodeId, newly_matched: bool },
    /// Unmatched miss; the scan moved one slot later.
    ScanAdvanced,
    /// Miss while matched.
    MatchedMiss { consecutive: u32 },
}

impl SenderState {
    /// First half of a sending slot: decide what to put on the air.
    pub fn begin_attempt(&mut self, queue: &mut MessageQueue, spec: ChargingSpec) -> SenderAction {
        if queue.is_empty() {
            return SenderAction::ReturnToListening(ListenReason::QueueEmpty);
        }
        if !self.flag_match && self.attempt_send > spec.t() {
            self.attempt_send = 0;
            return SenderAction::ReturnToListening(ListenReason::AttemptsExhausted);
        }
        if !self.flag_match {
            self.max_messages = queue.len();
        }
        let item = queue.pop().expect("queue checked non-empty");
        SenderAction::Transmit(Outgoing {
            item,
            dst: self.id_next,
            is_start: self.batch_acked == 0,
            is_end: queue.is_empty(),
        })
    }

    /// Second half: react to the acknowledgement phase. `ack_from` is the
    /// source of a decoded ack addressed to this node.
    pub fn finish_attempt(
        &mut self,
        out: Outgoing,
        ack_from: Option<NodeId>,
        queue: &mut MessageQueue,
        spec: ChargingSpec,
    ) -> AttemptOutcome {
        if let Some(src) = ack_from {
            let newly_matched = !self.flag_match;
            if newly_matched {
                self.flag_match = true;
                self.id_next = Some(src);
            }
            // an acknowledged end frame closes the batch; later readings open a new one
            self.batch_acked = if out.is_end { 0 } else { self.batch_acked + 1 };
            self.matched_misses = 0;
            return AttemptOutcome::Delivered {
                to: src,
                newly_matched,
            };
        }
        queue.push_front(out.item);
        if self.flag_match {
            self.matched_misses += 1;
            AttemptOutcome::MatchedMiss {
                consecutive: self.matched_misses,
            }
        } else {
            self.attempt_send += 1;
            self.offset_forth = (self.offset_forth + 1) % (spec.t() + 1);
            self.offset_back = offset_back(self.offset_forth, spec);
            AttemptOutcome::ScanAdvanced
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverState {
    /// Upstream sender this node is locked to.
    pub id_match: Option<NodeId>,
    /// Working slots since the last legitimate frame.
    pub time_wait: u32,
    /// Keys of the last few stored messages, so a retry of one that was
    /// already forwarded is acknowledged instead of stored twice.
    pub recent: [Option<(NodeId, u32)>; RECENT_KEYS],
}

pub const RECENT_KEYS: usize = 4;

/// A decoded data frame as seen by a receiver.
#[derive(Clone, Copy, Debug)]
pub struct Incoming<'a> {
    pub src: NodeId,
    pub dst: Option<NodeId>,
    pub data: &'a DataFrame,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    /// Sender is not further from the sink than this node.
    NotUpstream,
    /// Addressed elsewhere or blocked by a lock.
    NotForUs,
    QueueFull,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReceiverOutcome {
    /// Acknowledge this sender.
    pub ack: Option<NodeId>,
    /// Stored as a new message.
    pub accepted: bool,
    /// Acknowledged again without storing.
    pub duplicate: bool,
    pub dropped: Option<DropReason>,
    /// Message discarded because the sender picked another receiver.
    pub stale: Option<QueuedMessage>,
    pub become_sender: bool,
}

impl ReceiverState {
    pub fn receiver_step(
        &mut self,
        incoming: Option<Incoming<'_>>,
        self_id: NodeId,
        self_hop: u32,
        queue: &mut MessageQueue,
        params: &ForwardingParams,
        spec: ChargingSpec,
    ) -> ReceiverOutcome {
        let mut out = ReceiverOutcome::default();
        if let Some(f) = incoming {
            let addressed = match (f.dst, self.id_match) {
                (Some(d), None) => d == self_id,
                (Some(d), Some(m)) => d == self_id && m == f.src,
                (None, None) => true,
                (None, Some(m)) => m == f.src,
            };
            let upstream = f.data.src_hop > self_hop;
            if upstream && addressed {
                let key = f.data.message.key();
                if queue.contains(key) || self.recent.contains(&Some(key)) {
                    out.duplicate = true;
                } else {
                    let mut message = f.data.message.clone();
                    message.path.push(self_id);
                    let stored = queue.push(QueuedMessage {
                        message,
                        from: Some(f.src),
                        unaddressed: f.dst.is_none(),
                    });
                    if !stored {
                        out.dropped = Some(DropReason::QueueFull);
                        return self.finish(out, queue, params, spec);
                    }
                    self.recent.rotate_right(1);
                    self.recent[0] = Some(key);
                    out.accepted = true;
                }
                out.ack = Some(f.src);
                self.time_wait = 0;
                if f.data.is_end {
                    self.id_match = None;
                    out.become_sender = true;
                } else if f.data.is_start {
                    self.id_match = Some(f.src);
                }
                return out;
            }
            out.dropped = Some(if upstream {
                DropReason::NotForUs
            } else {
                DropReason::NotUpstream
            });
            if self.id_match == Some(f.src) && f.dst.is_some_and(|d| d != self_id) {
                self.id_match = None;
                out.stale = queue.pop_stale_from(f.src);
            }
        }
        self.finish(out, queue, params, spec)
    }

    fn finish(
        &mut self,
        mut out: ReceiverOutcome,
        queue: &MessageQueue,
        params: &ForwardingParams,
        spec: ChargingSpec,
    ) -> ReceiverOutcome {
        self.time_wait += 1;
        if self.id_match.is_some() {
            if self.time_wait > spec.t() + 1 {
                self.id_match = None;
                self.time_wait = 0;
                out.become_sender = !queue.is_empty();
            }
        } else if queue.len() >= params.threshold {
            out.become_sender = true;
        }
        out
    }
}
