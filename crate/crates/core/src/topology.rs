//! Broadcast-wait topology construction.
//!
//! The sink stays silent for `t` slots and then transmits its hop count in
//! every slot for one full cycle. A node that learns a strictly smaller hop
//! count adopts it, waits until the sender has finished its remaining rounds,
//! then rebroadcasts for `t + 1` rounds, shifting its working slot by one per
//! round so that every possible neighbour offset is hit exactly once.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::frame::Hop;
use crate::scenario::{Scenario, SINK};
use crate::slot::{ChargingSpec, NodeId, SlotTime, WorkOffset};

/// How the post-update wait timer is derived from the sender's round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitTimerMode {
    /// `(t - r)` remaining rounds of `t + 1` slots each.
    Rounds,
    /// `(t - r)` slots.
    Slots,
    /// Until the cycle boundary after the sender's final round. The sink
    /// sends one round per slot, everyone else one round per cycle. Keeps
    /// every hop level inside its own block of `t + 1` cycles.
    #[default]
    CycleAligned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopoParams {
    /// Upper bound on the network diameter in hops.
    pub max_hop: u32,
    pub wait_mode: WaitTimerMode,
}

impl Default for TopoParams {
    fn default() -> Self {
        Self {
            max_hop: 10,
            wait_mode: WaitTimerMode::CycleAligned,
        }
    }
}

impl TopoParams {
    /// Twice `ceil(area diagonal / range)`, at least 1. Sparse random
    /// placements route around holes, so hop counts well above the
    /// straight-line estimate are common.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let hops = 2 * (scenario.area.diagonal() / scenario.range_m).ceil() as u32;
        Self {
            max_hop: hops.max(1),
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopoPhase {
    Listening,
    /// Waiting for the upstream sender to finish; broadcasting begins at the
    /// first later working slot at or after `until`.
    Waiting { until: SlotTime },
    Broadcasting { round: u32 },
    /// Fallback scan for any neighbour that already has a hop count.
    Probing { attempt: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoState {
    pub hop: Hop,
    pub next_hop: Option<NodeId>,
    pub phase: TopoPhase,
    pub base_offset: WorkOffset,
    /// Start of the current hop-less listening stretch.
    pub listen_since: SlotTime,
    pub unreachable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopFrameOutcome {
    Updated { timer_slots: u64 },
    Ignored,
    /// Round outside `[0, t]`; the frame is dropped.
    Malformed,
}

impl HopFrameOutcome {
    /// Every well-formed decode is acknowledged.
    pub fn wants_ack(self) -> bool {
        !matches!(self, HopFrameOutcome::Malformed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FallbackDecision {
    KeepListening,
    StartProbing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeOutcome {
    /// Adopted `hop` through `via`; the node will now rebroadcast.
    Adopted { hop: u32, via: NodeId },
    Continue,
    Exhausted,
}

/// Sink broadcast plan: silent first, then one frame per slot for a cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SinkSchedule {
    pub silent_slots: u64,
    pub transmit_slots: u64,
}

impl SinkSchedule {
    pub fn total(&self) -> u64 {
        self.silent_slots + self.transmit_slots
    }

    /// Round carried by the sink frame in `slot`, if the sink transmits then.
    pub fn round_at(&self, slot: SlotTime) -> Option<u32> {
        let s = slot.get();
        (s >= self.silent_slots && s < self.total()).then(|| (s - self.silent_slots) as u32)
    }
}

pub fn sink_schedule(spec: ChargingSpec) -> SinkSchedule {
    SinkSchedule {
        silent_slots: spec.t() as u64,
        transmit_slots: spec.cycle_len(),
    }
}

pub fn wait_timer_slots(round: u32, spec: ChargingSpec, mode: WaitTimerMode, sender_hop: u32) -> u64 {
    let remaining = (spec.t() - round) as u64;
    match mode {
        WaitTimerMode::Rounds => remaining * spec.cycle_len(),
        WaitTimerMode::Slots => remaining,
        WaitTimerMode::CycleAligned if sender_hop == 0 => remaining,
        WaitTimerMode::CycleAligned => remaining * spec.cycle_len(),
    }
}

/// First slot at which a node that heard `round` at `now` may broadcast.
pub fn wait_deadline(now: SlotTime, round: u32, spec: ChargingSpec, mode: WaitTimerMode, sender_hop: u32) -> SlotTime {
    let last = now.after(wait_timer_slots(round, spec, mode, sender_hop));
    match mode {
        WaitTimerMode::CycleAligned => SlotTime((last.cycle(spec) + 1) * spec.cycle_len()),
        WaitTimerMode::Rounds | WaitTimerMode::Slots => last,
    }
}

/// Listening time after which a hop-less node starts probing.
pub fn fallback_threshold(spec: ChargingSpec, params: &TopoParams) -> u64 {
    let cyc = spec.cycle_len();
    cyc * (cyc + 1) * params.max_hop as u64
}

/// Slots one full rebroadcast takes.
pub fn broadcast_duration(spec: ChargingSpec) -> u64 {
    spec.cycle_len() * spec.cycle_len()
}

impl TopoState {
    pub fn node(base_offset: WorkOffset) -> Self {
        Self {
            hop: None,
            next_hop: None,
            phase: TopoPhase::Listening,
            base_offset,
            listen_since: SlotTime::ZERO,
            unreachable: false,
        }
    }

    pub fn sink() -> Self {
        Self {
            hop: Some(0),
            ..Self::node(WorkOffset::wrapping(0, ChargingSpec::new(1).expect("t=1")))
        }
    }

    /// Working slot position for the current phase.
    pub fn current_offset(&self, spec: ChargingSpec) -> WorkOffset {
        let shift = match self.phase {
            TopoPhase::Broadcasting { round } => round,
            TopoPhase::Probing { attempt } => attempt,
            _ => 0,
        };
        WorkOffset::wrapping(self.base_offset.value() as u64 + shift as u64, spec)
    }

    /// Nothing left to do unless a better hop count shows up.
    pub fn is_settled(&self) -> bool {
        matches!(self.phase, TopoPhase::Listening) && (self.hop.is_some() || self.unreachable)
    }

    pub fn on_hop_frame(
        &mut self,
        src: NodeId,
        hop: u32,
        round: u32,
        now: SlotTime,
        spec: ChargingSpec,
        params: &TopoParams,
    ) -> HopFrameOutcome {
        if round > spec.t() {
            return HopFrameOutcome::Malformed;
        }
        let candidate = hop.saturating_add(1);
        if self.hop.is_some_and(|h| candidate >= h) {
            return HopFrameOutcome::Ignored;
        }
        let until = wait_deadline(now, round, spec, params.wait_mode, hop);
        let timer_slots = until.get() - now.get();
        self.hop = Some(candidate);
        self.next_hop = Some(src);
        self.unreachable = false;
        self.phase = TopoPhase::Waiting { until };
        HopFrameOutcome::Updated { timer_slots }
    }

    /// Called at a working slot; turns an expired wait into broadcasting.
    pub fn poll_wait(&mut self, now: SlotTime) {
        if let TopoPhase::Waiting { until } = self.phase {
            if now >= until {
                self.phase = TopoPhase::Broadcasting { round: 0 };
            }
        }
    }

    /// Emits `(hop, round)` for this round and advances to the next one.
    /// Returns `None` outside the broadcasting phase.
    pub fn broadcast_step(&mut self, now: SlotTime, spec: ChargingSpec) -> Option<(u32, u32)> {
        let TopoPhase::Broadcasting { round } = self.phase else {
            return None;
        };
        let hop = self.hop?;
        if round >= spec.t() {
            self.phase = TopoPhase::Listening;
            self.listen_since = now;
        } else {
            self.phase = TopoPhase::Broadcasting { round: round + 1 };
        }
        Some((hop, round))
    }

    pub fn listen_fallback(
        &self,
        now: SlotTime,
        spec: ChargingSpec,
        params: &TopoParams,
    ) -> FallbackDecision {
        if self.phase == TopoPhase::Listening
            && self.hop.is_none()
            && !self.unreachable
            && now.get().saturating_sub(self.listen_since.get()) > fallback_threshold(spec, params)
        {
            FallbackDecision::StartProbing
        } else {
            FallbackDecision::KeepListening
        }
    }

    pub fn start_probing(&mut self) {
        self.phase = TopoPhase::Probing { attempt: 0 };
    }

    /// Outcome of one probe slot. `ack` carries `(acker, acker hop)`.
    pub fn probe_result(
        &mut self,
        ack: Option<(NodeId, u32)>,
        now: SlotTime,
        spec: ChargingSpec,
    ) -> ProbeOutcome {
        let TopoPhase::Probing { attempt } = self.phase else {
            return ProbeOutcome::Continue;
        };
        if let Some((via, h)) = ack {
            let hop = h + 1;
            self.hop = Some(hop);
            self.next_hop = Some(via);
            // rebroadcast right away so nodes further out learn a hop count
            self.phase = TopoPhase::Waiting { until: now };
            return ProbeOutcome::Adopted { hop, via };
        }
        if attempt >= spec.t() {
            self.phase = TopoPhase::Listening;
            self.listen_since = now;
            self.unreachable = true;
            ProbeOutcome::Exhausted
        } else {
            self.phase = TopoPhase::Probing {
                attempt: attempt + 1,
            };
            ProbeOutcome::Continue
        }
    }
}

/// Least hop count of every node over the unit-disk graph.
pub fn bfs_oracle(scenario: &Scenario) -> Vec<Hop> {
    let adj = scenario.adjacency();
    let mut dist: Vec<Hop> = vec![None; scenario.len()];
    dist[SINK.index()] = Some(0);
    let mut queue = VecDeque::from([SINK]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u.index()].expect("queued nodes have a distance");
        for &v in &adj[u.index()] {
            if dist[v.index()].is_none() {
                dist[v.index()] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Final routing state of one node after construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopoEntry {
    pub node_id: NodeId,
    pub hop: Hop,
    pub next_hop: Option<NodeId>,
    pub converged_at_slot: Option<SlotTime>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyResult {
    pub entries: Vec<TopoEntry>,
    /// Slot count until every node finished broadcasting.
    pub converged_at: SlotTime,
}

impl TopologyResult {
    pub fn hop(&self, id: NodeId) -> Hop {
        self.entries[id.index()].hop
    }

    pub fn next_hop(&self, id: NodeId) -> Option<NodeId> {
        self.entries[id.index()].next_hop
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.entries)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    WrongHop {
        node: NodeId,
        got: Hop,
        expected: Hop,
    },
    /// Following next-hop pointers does not reach the sink in `hop` steps.
    BrokenPath { node: NodeId },
    Cycle { node: NodeId },
    /// A next hop that is out of radio range.
    NotNeighbor { node: NodeId, next: NodeId },
}

impl Violation {
    pub fn node(&self) -> NodeId {
        match *self {
            Violation::WrongHop { node, .. }
            | Violation::BrokenPath { node }
            | Violation::Cycle { node }
            | Violation::NotNeighbor { node, .. } => node,
        }
    }
}

/// Checks least-hop optimality and that next-hop pointers form a
/// sink-rooted tree.
pub fn verify_least_hop(
    result: &TopologyResult,
    oracle: &[Hop],
    scenario: &Scenario,
) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    for e in &result.entries {
        let expected = oracle[e.node_id.index()];
        if e.hop != expected {
            violations.push(Violation::WrongHop {
                node: e.node_id,
                got: e.hop,
                expected,
            });
        }
        if e.node_id == SINK {
            continue;
        }
        let Some(hop) = e.hop else { continue };
        let mut cur = e.node_id;
        let mut steps = 0u32;
        let mut visited = vec![false; result.entries.len()];
        visited[cur.index()] = true;
        let mut fault = None;
        while cur != SINK {
            let Some(next) = result.entries[cur.index()].next_hop else {
                fault = Some(Violation::BrokenPath { node: e.node_id });
                break;
            };
            if !scenario.in_range(cur, next) {
                fault = Some(Violation::NotNeighbor { node: cur, next });
                break;
            }
            if visited[next.index()] {
                fault = Some(Violation::Cycle { node: e.node_id });
                break;
            }
            visited[next.index()] = true;
            cur = next;
            steps += 1;
        }
        if let Some(f) = fault {
            violations.push(f);
        } else if steps != hop {
            violations.push(Violation::BrokenPath { node: e.node_id });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radio::Position;
    use crate::scenario::{Area, Shape};

    fn spec(t: u32) -> ChargingSpec {
        ChargingSpec::new(t).unwrap()
    }

    fn chain() -> Scenario {
        Scenario::new(
            spec(5),
            10.0,
            Area {
                width: 30.0,
                height: 10.0,
                shape: Shape::Custom,
            },
            Position::new(0.0, 0.0),
            &[(Position::new(9.0, 0.0), 2), (Position::new(18.0, 0.0), 4)],
            0,
        )
        .unwrap()
    }

    #[test]
    fn sink_schedule_lengths() {
        let s = sink_schedule(spec(5));
        assert_eq!((s.silent_slots, s.transmit_slots, s.total()), (5, 6, 11));
        let s = sink_schedule(spec(1));
        assert_eq!((s.silent_slots, s.transmit_slots, s.total()), (1, 2, 3));
    }

    #[test]
    fn every_offset_hears_exactly_one_sink_frame() {
        let sp = spec(5);
        let sched = sink_schedule(sp);
        for o in 0..=5 {
            let off = WorkOffset::new(o, sp).unwrap();
            let heard = (0..sched.total())
                .filter(|&s| {
                    sched.round_at(SlotTime(s)).is_some()
                        && crate::slot::is_working(off, sp, SlotTime(s))
                })
                .count();
            assert_eq!(heard, 1, "offset {o}");
        }
    }

    #[test]
    fn first_sink_frame_sets_hop_and_timer() {
        let sp = spec(5);
        let mut st = TopoState::node(WorkOffset::new(2, sp).unwrap());
        let rounds = TopoParams {
            wait_mode: WaitTimerMode::Rounds,
            ..TopoParams::default()
        };
        let out = st.on_hop_frame(SINK, 0, 2, SlotTime(8), sp, &rounds);
        assert_eq!(out, HopFrameOutcome::Updated { timer_slots: 18 });
        assert_eq!(st.hop, Some(1));
        let mut st = TopoState::node(WorkOffset::new(2, sp).unwrap());
        let out = st.on_hop_frame(SINK, 0, 2, SlotTime(8), sp, &TopoParams::default());
        assert_eq!(out, HopFrameOutcome::Updated { timer_slots: 4 });
        assert_eq!(st.next_hop, Some(SINK));
    }

    #[test]
    fn literal_timer_mode() {
        assert_eq!(wait_timer_slots(2, spec(5), WaitTimerMode::Slots, 3), 3);
    }

    #[test]
    fn cycle_aligned_deadline() {
        let m = WaitTimerMode::CycleAligned;
        let sp = spec(5);
        // sink round 2 is sent in slot 7; the sink finishes in slot 10, cycle 1
        assert_eq!(wait_deadline(SlotTime(7), 2, sp, m, 0), SlotTime(12));
        assert_eq!(wait_deadline(SlotTime(5), 0, sp, m, 0), SlotTime(12));
        assert_eq!(wait_deadline(SlotTime(10), 5, sp, m, 0), SlotTime(12));
        // a sensor that sent round 1 in cycle 4 sends its last round in cycle 8
        assert_eq!(wait_deadline(SlotTime(27), 1, sp, m, 2), SlotTime(54));
        assert_eq!(wait_deadline(SlotTime(27), 1, sp, WaitTimerMode::Rounds, 2), SlotTime(51));
    }

    #[test]
    fn worse_frame_ignored() {
        let sp = spec(5);
        let mut st = TopoState::node(WorkOffset::new(0, sp).unwrap());
        st.hop = Some(2);
        st.next_hop = Some(NodeId(4));
        let before = st.clone();
        let out = st.on_hop_frame(NodeId(7), 3, 0, SlotTime(100), sp, &TopoParams::default());
        assert_eq!(out, HopFrameOutcome::Ignored);
        assert_eq!(st, before);
    }

    #[test]
    fn better_frame_restarts_wait() {
        let sp = spec(5);
        let p = TopoParams::default();
        let mut st = TopoState::node(WorkOffset::new(0, sp).unwrap());
        st.on_hop_frame(NodeId(3), 1, 0, SlotTime(30), sp, &p);
        assert_eq!(st.hop, Some(2));
        st.on_hop_frame(SINK, 0, 4, SlotTime(36), sp, &p);
        assert_eq!(st.hop, Some(1));
        assert_eq!(
            st.phase,
            TopoPhase::Waiting {
                until: SlotTime(36 + 6)
            }
        );
    }

    #[test]
    fn malformed_round_dropped() {
        let sp = spec(5);
        let mut st = TopoState::node(WorkOffset::new(0, sp).unwrap());
        let out = st.on_hop_frame(SINK, 0, 9, SlotTime(0), sp, &TopoParams::default());
        assert_eq!(out, HopFrameOutcome::Malformed);
        assert_eq!(st.hop, None);
    }

    #[test]
    fn broadcast_rounds_rotate_offset() {
        let sp = spec(5);
        let mut st = TopoState::node(WorkOffset::new(2, sp).unwrap());
        st.hop = Some(1);
        st.phase = TopoPhase::Broadcasting { round: 0 };
        let mut visited = Vec::new();
        while let TopoPhase::Broadcasting { .. } = st.phase {
            visited.push(st.current_offset(sp).value());
            st.broadcast_step(SlotTime(0), sp).unwrap();
        }
        assert_eq!(visited, vec![2, 3, 4, 5, 0, 1]);
        assert_eq!(st.current_offset(sp).value(), 2);
        assert_eq!(broadcast_duration(sp), 36);
    }

    #[test]
    fn fallback_threshold_example() {
        let p = TopoParams {
            max_hop: 10,
            ..TopoParams::default()
        };
        assert_eq!(fallback_threshold(spec(5), &p), 420);
        let sp = spec(5);
        let st = TopoState::node(WorkOffset::new(0, sp).unwrap());
        assert_eq!(st.listen_fallback(SlotTime(420), sp, &p), FallbackDecision::KeepListening);
        assert_eq!(st.listen_fallback(SlotTime(421), sp, &p), FallbackDecision::StartProbing);
    }

    #[test]
    fn probe_exhaustion_marks_unreachable() {
        let sp = spec(2);
        let mut st = TopoState::node(WorkOffset::new(0, sp).unwrap());
        st.start_probing();
        assert_eq!(st.probe_result(None, SlotTime(1), sp), ProbeOutcome::Continue);
        assert_eq!(st.probe_result(None, SlotTime(2), sp), ProbeOutcome::Continue);
        assert_eq!(st.probe_result(None, SlotTime(3), sp), ProbeOutcome::Exhausted);
        assert!(st.unreachable && st.is_settled());
    }

    #[test]
    fn bfs_on_chain() {
        let d = bfs_oracle(&chain());
        assert_eq!(d, vec![Some(0), Some(1), Some(2)]);
    }

    fn good_result() -> TopologyResult {
        TopologyResult {
            entries: vec![
                TopoEntry {
                    node_id: SINK,
                    hop: Some(0),
                    next_hop: None,
                    converged_at_slot: None,
                },
                TopoEntry {
                    node_id: NodeId(1),
                    hop: Some(1),
                    next_hop: Some(SINK),
                    converged_at_slot: None,
                },
                TopoEntry {
                    node_id: NodeId(2),
                    hop: Some(2),
                    next_hop: Some(NodeId(1)),
                    converged_at_slot: None,
                },
            ],
            converged_at: SlotTime(100),
        }
    }

    #[test]
    fn verifier_accepts_correct_tree() {
        let sc = chain();
        assert!(verify_least_hop(&good_result(), &bfs_oracle(&sc), &sc).is_ok());
    }

    #[test]
    fn verifier_flags_corrupted_hop() {
        let sc = chain();
        let mut r = good_result();
        r.entries[2].hop = Some(3);
        let v = verify_least_hop(&r, &bfs_oracle(&sc), &sc).unwrap_err();
        assert!(v.iter().any(|x| x.node() == NodeId(2)));
        assert!(v.iter().all(|x| x.node() == NodeId(2)));
    }

    #[test]
    fn verifier_flags_cycle() {
        let sc = chain();
        let mut r = good_result();
        r.entries[1].next_hop = Some(NodeId(2));
        let v = verify_least_hop(&r, &bfs_oracle(&sc), &sc).unwrap_err();
        assert!(v.iter().any(|x| matches!(x, Violation::Cycle { .. })));
    }
}
