//! Slot-stepped simulation of a whole network.
//!
//! Time only advances to slots in which some node is awake: a min-heap of
//! wakeups drives the loop, so long charging periods cost nothing. Within a
//! slot every awake node first decides whether to transmit or listen, the
//! data phase is resolved, receivers queue their acknowledgements, and the
//! acknowledgement phase is resolved for the transmitters.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{rncs_next_hop, FailureResponse, Strategy};
use crate::error::{ConfigError, SimError};
use crate::forwarding::{
    failure_recovery_wait, AttemptOutcome, ForwardingParams, Incoming, ListenReason,
    MessageQueue, Outgoing, QueuedMessage, ReceiverState, SenderAction, SenderState,
};
use crate::frame::{DataFrame, Frame, FrameKind, Message};
use crate::metrics::{MessageRow, MetricsRecord};
use crate::radio::{resolve_slot, Airing, Position, RadioConfig, Reception};
use crate::rng::{derive_rng_stream, Purpose, Stream};
use crate::scenario::{Scenario, SINK};
use crate::slot::{ChargingSpec, NodeId, SlotTime, WorkOffset};
use crate::topology::{
    broadcast_duration, fallback_threshold, sink_schedule, FallbackDecision, HopFrameOutcome,
    ProbeOutcome, TopoEntry, TopoParams, TopoPhase, TopoState, TopologyResult,
};
use crate::trace::{EventTrace, TraceKind};

/// Node failure, in slots after forwarding starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeKill {
    pub node: NodeId,
    pub after: u64,
}

/// Window, relative to forwarding start, in which `node` decodes no acks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AckBlackout {
    pub node: NodeId,
    pub from: u64,
    pub to: u64,
}

/// Failures injected during forwarding. Topology construction always runs
/// failure-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub kills: Vec<NodeKill>,
    pub ack_blackouts: Vec<AckBlackout>,
}

impl FaultPlan {
    pub fn is_empty(&self) -> bool {
        self.kills.is_empty() && self.ack_blackouts.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub forwarding: ForwardingParams,
    /// `None` derives the hop bound from the scenario area.
    pub topo: Option<TopoParams>,
    pub radio: RadioConfig,
    /// Readings per node, one per charging cycle. Zero skips forwarding.
    pub rounds: u32,
    /// Forwarding stops after this many charging cycles.
    pub horizon_cycles: u64,
    pub trace: bool,
    pub faults: FaultPlan,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Rics,
            forwarding: ForwardingParams::default(),
            topo: None,
            radio: RadioConfig::default(),
            rounds: 1,
            horizon_cycles: 20_000,
            trace: false,
            faults: FaultPlan::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.forwarding.validate()?;
        self.radio.validate()?;
        if self.horizon_cycles == 0 {
            return Err(ConfigError::Invalid("horizon_cycles must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub topology: TopologyResult,
    pub metrics: MetricsRecord,
    pub trace: Option<EventTrace>,
}

#[derive(Clone, Debug)]
enum Role {
    Receiver,
    Sender(SenderState),
    Recovery { until: SlotTime },
}

struct NodeRt {
    pos: Position,
    topo: TopoState,
    converged_at: Option<SlotTime>,
    /// Hop counts heard from neighbours.
    neighbors: BTreeMap<NodeId, u32>,
    role: Role,
    queue: MessageQueue,
    receiver: ReceiverState,
    /// Synchronized next hop and its offset.
    cache: Option<(NodeId, u32)>,
    /// Next hop the following scan aims at; `None` accepts any lower hop.
    target: Option<NodeId>,
    scan_began: Option<SlotTime>,
    /// Full scans in a row that found nobody.
    fruitless_scans: u32,
    generated: u32,
    last_gen_cycle: Option<u64>,
    alive: bool,
    kill_at: Option<SlotTime>,
    jitter: Stream,
    ack_jitter: Stream,
    next_hop_rng: Stream,
}

impl NodeRt {
    fn current_offset(&self, spec: ChargingSpec) -> WorkOffset {
        match &self.role {
            Role::Sender(st) if self.topo.is_settled() => st.current_offset(self.topo.base_offset, spec),
            _ => self.topo.current_offset(spec),
        }
    }
}

/// Runs topology construction and, unless `rounds` is zero, forwarding.
pub fn run(scenario: &Scenario, config: SimConfig) -> Result<RunOutput, SimError> {
    Simulator::new(scenario, config)?.run()
}

pub struct Simulator<'a> {
    scenario: &'a Scenario,
    cfg: SimConfig,
    spec: ChargingSpec,
    topo_params: TopoParams,
    nodes: Vec<NodeRt>,
    wakes: BinaryHeap<Reverse<(SlotTime, NodeId)>>,
    metrics: MetricsRecord,
    trace: Option<EventTrace>,
    rows: BTreeMap<(NodeId, u32), usize>,
    delivered: BTreeSet<(NodeId, u32)>,
    fwd_start: SlotTime,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let spec = scenario.spec;
        let topo_params = cfg.topo.unwrap_or_else(|| TopoParams::for_scenario(scenario));
        let nodes = scenario
            .nodes
            .iter()
            .map(|n| NodeRt {
                pos: n.pos,
                topo: if n.id == SINK {
                    TopoState::sink()
                } else {
                    TopoState::node(n.initial_offset)
                },
                converged_at: (n.id == SINK).then_some(SlotTime::ZERO),
                neighbors: BTreeMap::new(),
                role: Role::Receiver,
                queue: MessageQueue::new(cfg.forwarding.q_max),
                receiver: ReceiverState::default(),
                cache: None,
                target: None,
                scan_began: None,
                fruitless_scans: 0,
                generated: 0,
                last_gen_cycle: None,
                alive: true,
                kill_at: None,
                jitter: derive_rng_stream(scenario.seed, n.id, Purpose::Jitter),
                ack_jitter: derive_rng_stream(scenario.seed, n.id, Purpose::AckJitter),
                next_hop_rng: derive_rng_stream(scenario.seed, n.id, Purpose::NextHop),
            })
            .collect();
        let trace = cfg.trace.then(EventTrace::default);
        Ok(Self {
            scenario,
            cfg,
            spec,
            topo_params,
            nodes,
            wakes: BinaryHeap::new(),
            metrics: MetricsRecord::default(),
            trace,
            rows: BTreeMap::new(),
            delivered: BTreeSet::new(),
            fwd_start: SlotTime::ZERO,
        })
    }

    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let topo_time = self.run_topology()?;
        self.metrics.topo_time_slots = topo_time.get();
        self.metrics.end_slot = topo_time.get();
        if self.cfg.rounds > 0 {
            self.run_forwarding(topo_time);
        }
        let entries = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| TopoEntry {
                node_id: NodeId(i as u32),
                hop: n.topo.hop,
                next_hop: n.topo.next_hop,
                converged_at_slot: n.converged_at,
            })
            .collect();
        Ok(RunOutput {
            topology: TopologyResult {
                entries,
                converged_at: topo_time,
            },
            metrics: self.metrics,
            trace: self.trace,
        })
    }

    fn log(&mut self, slot: SlotTime, node: NodeId, kind: TraceKind) {
        if let Some(t) = self.trace.as_mut() {
            t.push(slot, node, kind);
        }
    }

    fn micro_slot(&mut self, node: NodeId, ack: bool) -> u32 {
        let m = self.cfg.radio.micro_slots;
        let n = &mut self.nodes[node.index()];
        if ack {
            n.ack_jitter.gen_range(0..m)
        } else {
            n.jitter.gen_range(0..m)
        }
    }

    /// Resolves one radio phase; returns the decoded transmission index per listener.
    fn air(&mut self, now: SlotTime, txs: &[(NodeId, Frame)], listeners: &[NodeId]) -> Vec<Option<usize>> {
        if txs.is_empty() {
            return vec![None; listeners.len()];
        }
        let airings: Vec<Airing> = txs
            .iter()
            .map(|(src, f)| Airing {
                src: *src,
                pos: self.nodes[src.index()].pos,
                jitter: f.jitter,
            })
            .collect();
        let ls: Vec<(NodeId, Position)> = listeners
            .iter()
            .map(|&id| (id, self.nodes[id.index()].pos))
            .collect();
        let rx = resolve_slot(&airings, &ls, self.scenario.range_m);
        let mut out = Vec::with_capacity(rx.len());
        for (&id, r) in listeners.iter().zip(rx) {
            out.push(match r {
                Reception::Decoded(i) => Some(i),
                Reception::Collision => {
                    self.metrics.collisions += 1;
                    self.log(now, id, TraceKind::Collision);
                    None
                }
                Reception::Silence | Reception::Transmitting => None,
            });
        }
        out
    }

    fn schedule(&mut self, node: NodeId, now: SlotTime) {
        let n = &self.nodes[node.index()];
        if !n.alive {
            return;
        }
        let offset = n.current_offset(self.spec);
        let next = offset.slot_in_cycle(now.cycle(self.spec) + 1, self.spec);
        self.wakes.push(Reverse((next, node)));
    }

    fn pop_awake(&mut self) -> Option<(SlotTime, Vec<NodeId>)> {
        let Reverse((now, first)) = self.wakes.pop()?;
        let mut awake = vec![first];
        while let Some(Reverse((s, id))) = self.wakes.peek().copied() {
            if s != now {
                break;
            }
            self.wakes.pop();
            awake.push(id);
        }
        Some((now, awake))
    }

    fn topo_limit(&self) -> u64 {
        let hops = self.topo_params.max_hop as u64 + 2;
        2 * fallback_threshold(self.spec, &self.topo_params)
            + 4 * hops * broadcast_duration(self.spec)
    }

    fn run_topology(&mut self) -> Result<SlotTime, SimError> {
        let sched = sink_schedule(self.spec);
        for i in 1..self.nodes.len() {
            let base = self.nodes[i].topo.base_offset;
            self.wakes
                .push(Reverse((base.slot_in_cycle(0, self.spec), NodeId(i as u32))));
        }
        let limit = self.topo_limit();
        let mut sink_next = Some(SlotTime(sched.silent_slots));
        loop {
            let heap_next = self.wakes.peek().map(|Reverse((s, _))| *s);
            let now = match (heap_next, sink_next) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => return Ok(SlotTime(sched.total())),
            };
            if now.get() > limit {
                let pending = self.nodes.iter().filter(|n| !n.topo.is_settled()).count();
                return Err(SimError::DidNotConverge {
                    max_slots: SlotTime(limit),
                    pending,
                });
            }
            let awake = if heap_next == Some(now) {
                self.pop_awake().map(|(_, a)| a).unwrap_or_default()
            } else {
                Vec::new()
            };
            let settled_now = self.topo_slot(now, &awake, sched.round_at(now));
            sink_next = (now.get() + 1 < sched.total()).then(|| now.after(1));
            if settled_now && now.get() + 1 >= sched.total() && self.nodes.iter().all(|n| n.topo.is_settled())
            {
                return Ok(now.after(1));
            }
        }
    }

    /// One topology slot; returns whether some node settled in it.
    fn topo_slot(&mut self, now: SlotTime, awake: &[NodeId], sink_round: Option<u32>) -> bool {
        let spec = self.spec;
        let params = self.topo_params;
        let mut txs: Vec<(NodeId, Frame)> = Vec::new();
        let mut listeners = Vec::new();
        let mut probers = Vec::new();
        let mut settled = false;
        if let Some(round) = sink_round {
            let j = self.micro_slot(SINK, false);
            let f = Frame::hop_count(SINK, 0, round, spec, j).expect("sink rounds stay within [0, t]");
            txs.push((SINK, f));
            self.log(now, SINK, TraceKind::HopTx { hop: 0, round });
        } else {
            listeners.push(SINK);
        }
        for &u in awake {
            let node = &mut self.nodes[u.index()];
            node.topo.poll_wait(now);
            if node.topo.listen_fallback(now, spec, &params) == FallbackDecision::StartProbing {
                node.topo.start_probing();
            }
            match node.topo.phase {
                TopoPhase::Broadcasting { .. } => {
                    let (hop, round) = node.topo.broadcast_step(now, spec).expect("broadcasting node has a hop");
                    if node.topo.is_settled() {
                        node.converged_at = Some(now);
                        settled = true;
                    }
                    let j = self.micro_slot(u, false);
                    let f = Frame::hop_count(u, hop, round, spec, j).expect("rounds stay within [0, t]");
                    txs.push((u, f));
                    self.log(now, u, TraceKind::HopTx { hop, round });
                    if self.nodes[u.index()].topo.is_settled() {
                        self.log(now, u, TraceKind::Settled { hop: Some(hop) });
                    }
                }
                TopoPhase::Probing { attempt } => {
                    let j = self.micro_slot(u, false);
                    txs.push((u, Frame::probe(u, j)));
                    probers.push(u);
                    self.log(now, u, TraceKind::ProbeTx { attempt });
                }
                TopoPhase::Listening | TopoPhase::Waiting { .. } => listeners.push(u),
            }
        }

        let rx = self.air(now, &txs, &listeners);
        let mut acks: Vec<(NodeId, Frame)> = Vec::new();
        for (li, &u) in listeners.iter().enumerate() {
            let Some(i) = rx[li] else { continue };
            let src = txs[i].0;
            match txs[i].1.kind {
                FrameKind::HopCount { hop, round } if u != SINK => {
                    let node = &mut self.nodes[u.index()];
                    node.neighbors.insert(src, hop);
                    let outcome = node.topo.on_hop_frame(src, hop, round, now, spec, &params);
                    let my_hop = node.topo.hop;
                    match outcome {
                        HopFrameOutcome::Updated { .. } => {
                            node.converged_at = None;
                            self.log(now, u, TraceKind::HopUpdate { hop: hop + 1, via: src });
                        }
                        HopFrameOutcome::Malformed => self.metrics.protocol_errors += 1,
                        HopFrameOutcome::Ignored => {}
                    }
                    if outcome.wants_ack() {
                        let j = self.micro_slot(u, true);
                        acks.push((u, Frame::ack(u, src, my_hop, j)));
                    }
                }
                FrameKind::Probe => {
                    if let Some(h) = self.nodes[u.index()].topo.hop {
                        let j = self.micro_slot(u, true);
                        acks.push((u, Frame::ack(u, src, Some(h), j)));
                    }
                }
                _ => {}
            }
        }

        let senders: Vec<NodeId> = txs.iter().map(|(s, _)| *s).collect();
        let ack_rx = self.air(now, &acks, &senders);
        let mut heard: BTreeMap<NodeId, (NodeId, Option<u32>)> = BTreeMap::new();
        for (si, &v) in senders.iter().enumerate() {
            let Some(i) = ack_rx[si] else { continue };
            if let FrameKind::Ack { ack_dst, hop } = acks[i].1.kind {
                if ack_dst == v {
                    heard.insert(v, (acks[i].0, hop));
                }
            }
        }
        for (&v, &(from, hop)) in &heard {
            if v != SINK {
                if let Some(h) = hop {
                    self.nodes[v.index()].neighbors.insert(from, h);
                }
            }
        }
        for &p in &probers {
            let ack = heard.get(&p).and_then(|&(from, h)| h.map(|h| (from, h)));
            match self.nodes[p.index()].topo.probe_result(ack, now, spec) {
                ProbeOutcome::Adopted { hop, via } => {
                    self.nodes[p.index()].converged_at = None;
                    self.log(now, p, TraceKind::HopUpdate { hop, via });
                }
                ProbeOutcome::Exhausted => {
                    self.nodes[p.index()].converged_at = Some(now);
                    settled = true;
                    self.log(now, p, TraceKind::Unreachable);
                }
                ProbeOutcome::Continue => {}
            }
        }
        for &u in awake {
            self.schedule(u, now);
        }
        settled
    }

    fn run_forwarding(&mut self, topo_time: SlotTime) {
        let spec = self.spec;
        let cyc = spec.cycle_len();
        let c0 = topo_time.get().div_ceil(cyc);
        self.fwd_start = SlotTime(c0 * cyc);
        self.metrics.forwarding_start_slot = self.fwd_start.get();
        self.wakes.clear();
        for kill in self.cfg.faults.kills.clone() {
            if let Some(n) = self.nodes.get_mut(kill.node.index()) {
                n.kill_at = Some(self.fwd_start.after(kill.after));
            }
        }
        for i in 1..self.nodes.len() {
            let n = &mut self.nodes[i];
            n.target = n.topo.next_hop;
            let first = n.topo.base_offset.slot_in_cycle(c0, spec);
            self.wakes.push(Reverse((first, NodeId(i as u32))));
        }
        let gen_end = c0 + self.cfg.rounds as u64;
        let horizon = self.fwd_start.after(self.cfg.horizon_cycles * cyc);
        let mut end = self.fwd_start;
        while let Some(Reverse((next, _))) = self.wakes.peek().copied() {
            if next >= horizon {
                end = horizon;
                break;
            }
            let Some((now, awake)) = self.pop_awake() else { break };
            self.fwd_slot(now, &awake);
            end = now.after(1);
            let all_created = now.cycle(spec) >= gen_end;
            if all_created
                && (self.delivered.len() == self.metrics.messages.len() || !self.anything_in_flight())
            {
                break;
            }
        }
        self.finish_metrics(end);
    }

    /// Whether any live node still holds an undelivered message. Messages
    /// that died with a node or were dropped can never arrive.
    fn anything_in_flight(&self) -> bool {
        self.nodes
            .iter()
            .filter(|n| n.alive)
            .flat_map(|n| n.queue.iter())
            .any(|q| !self.delivered.contains(&q.message.key()))
    }

    fn finish_metrics(&mut self, end: SlotTime) {
        self.metrics.end_slot = end.get();
        self.metrics.undelivered = self.metrics.messages.len() - self.delivered.len();
        let mut resident = BTreeSet::new();
        for n in self.nodes.iter().filter(|n| n.alive) {
            for q in n.queue.iter() {
                if !self.delivered.contains(&q.message.key()) {
                    resident.insert(q.message.key());
                }
            }
        }
        self.metrics.residual_queued = resident.len();
    }

    fn generate(&mut self, u: NodeId, now: SlotTime) {
        let c = now.cycle(self.spec);
        let c0 = self.fwd_start.cycle(self.spec);
        let node = &mut self.nodes[u.index()];
        if c < c0 || c >= c0 + self.cfg.rounds as u64 || node.last_gen_cycle == Some(c) {
            return;
        }
        node.last_gen_cycle = Some(c);
        let seq = node.generated;
        node.generated += 1;
        let id = self.metrics.messages.len() as u64;
        let message = Message {
            id,
            origin: u,
            seq,
            created_at: now,
            path: vec![u],
        };
        let stored = node.queue.push(QueuedMessage {
            message,
            from: None,
            unaddressed: false,
        });
        self.rows.insert((u, seq), self.metrics.messages.len());
        self.metrics.messages.push(MessageRow {
            msg_id: id,
            src: u,
            seq,
            created_slot: now.get(),
            delivered_slot: None,
            hops: None,
            path: Vec::new(),
        });
        if stored {
            self.log(now, u, TraceKind::Generated { msg: id });
        } else {
            self.metrics.queue_drops += 1;
            self.log(now, u, TraceKind::QueueDrop { msg: id });
        }
    }

    fn start_sender(&mut self, u: NodeId) {
        let spec = self.spec;
        let strategy = self.cfg.strategy;
        let node = &mut self.nodes[u.index()];
        let Some(hop) = node.topo.hop else { return };
        let qlen = node.queue.len();
        match strategy {
            Strategy::Fxcs => node.target = node.topo.next_hop,
            Strategy::Rncs => {
                let known: Vec<(NodeId, u32)> = node.neighbors.iter().map(|(k, v)| (*k, *v)).collect();
                node.target = rncs_next_hop(&known, hop, &mut node.next_hop_rng).or(node.topo.next_hop);
            }
            Strategy::Rics | Strategy::Otps => {}
        }
        let st = match (strategy.caches_offsets(), node.cache, node.target) {
            (true, Some((next, off)), _) => SenderState::cached(next, off, qlen, spec),
            (_, _, Some(SINK)) => SenderState::cached(SINK, 0, qlen, spec),
            (_, _, target) => SenderState::scanning(target, qlen),
        };
        node.scan_began = None;
        node.role = Role::Sender(st);
    }

    fn handle_failure(&mut self, u: NodeId, now: SlotTime) {
        let wait = failure_recovery_wait(self.spec, &self.cfg.forwarding);
        let node = &mut self.nodes[u.index()];
        let lost = match &node.role {
            Role::Sender(st) => st.id_next,
            _ => node.target,
        };
        node.cache = None;
        node.scan_began = None;
        match self.cfg.strategy.on_failure() {
            FailureResponse::RecoveryWait => {
                node.target = None;
                node.receiver = ReceiverState::default();
                node.role = Role::Recovery { until: now.after(wait) };
                self.metrics.recoveries += 1;
            }
            FailureResponse::ProbeAny => {
                node.target = None;
                let qlen = node.queue.len();
                node.role = Role::Sender(SenderState::scanning(None, qlen));
                self.metrics.recoveries += 1;
            }
            FailureResponse::RetryFixed | FailureResponse::Redraw => node.role = Role::Receiver,
        }
        self.log(now, u, TraceKind::Failure { next: lost });
    }

    fn ack_blocked(&self, node: NodeId, now: SlotTime) -> bool {
        let rel = now.get().saturating_sub(self.fwd_start.get());
        self.cfg
            .faults
            .ack_blackouts
            .iter()
            .any(|b| b.node == node && (b.from..b.to).contains(&rel))
    }

    fn sink_receive(&mut self, now: SlotTime, src: NodeId, dst: Option<NodeId>, data: &DataFrame) -> bool {
        if dst.is_some_and(|d| d != SINK) {
            return false;
        }
        let key = data.message.key();
        if !self.delivered.insert(key) {
            self.metrics.duplicates_at_sink += 1;
            return true;
        }
        let mut path = data.message.path.clone();
        path.push(SINK);
        let hops = (path.len() - 1) as u32;
        if let Some(&row) = self.rows.get(&key) {
            let r = &mut self.metrics.messages[row];
            r.delivered_slot = Some(now.get());
            r.hops = Some(hops);
            r.path = path;
        }
        self.log(now, src, TraceKind::Delivered { msg: data.message.id, hops });
        true
    }

    fn fwd_slot(&mut self, now: SlotTime, awake: &[NodeId]) {
        let spec = self.spec;
        let mut txs: Vec<(NodeId, Frame)> = Vec::new();
        let mut outs: Vec<(NodeId, Outgoing)> = Vec::new();
        let mut listeners = vec![SINK];
        let mut active = Vec::with_capacity(awake.len());
        for &u in awake {
            if self.nodes[u.index()].kill_at.is_some_and(|k| now >= k) {
                let n = &mut self.nodes[u.index()];
                n.alive = false;
                self.metrics.lost_in_failures += n.queue.len();
                self.log(now, u, TraceKind::Killed);
                continue;
            }
            active.push(u);
            self.generate(u, now);
            let Some(hop) = self.nodes[u.index()].topo.hop else { continue };
            if let Role::Recovery { until } = self.nodes[u.index()].role {
                if now >= until {
                    self.log(now, u, TraceKind::RecoveryDone);
                    let n = &mut self.nodes[u.index()];
                    n.role = Role::Receiver;
                    if !n.queue.is_empty() {
                        let qlen = n.queue.len();
                        n.role = Role::Sender(SenderState::scanning(None, qlen));
                    }
                }
            }
            let node = &mut self.nodes[u.index()];
            let Role::Sender(st) = &mut node.role else {
                listeners.push(u);
                continue;
            };
            match st.begin_attempt(&mut node.queue, spec) {
                SenderAction::Transmit(out) => {
                    if !st.flag_match && node.scan_began.is_none() {
                        node.scan_began = Some(now);
                    }
                    let offset_forth = st.offset_forth;
                    let frame_data = out.data_frame(hop);
                    let j = self.micro_slot(u, false);
                    let kind = TraceKind::DataTx {
                        msg: out.item.message.id,
                        dst: out.dst,
                        is_start: out.is_start,
                        is_end: out.is_end,
                        offset_forth,
                    };
                    txs.push((u, Frame::data(u, out.dst, frame_data, j)));
                    outs.push((u, out));
                    self.log(now, u, kind);
                }
                SenderAction::ReturnToListening(reason) => {
                    let at_base = st.offset_forth == 0;
                    node.scan_began = None;
                    node.role = Role::Receiver;
                    if reason == ListenReason::AttemptsExhausted {
                        node.fruitless_scans += 1;
                        let give_up = node.fruitless_scans >= self.cfg.forwarding.scan_limit;
                        self.log(now, u, TraceKind::ScanExhausted);
                        if give_up {
                            self.nodes[u.index()].fruitless_scans = 0;
                            self.handle_failure(u, now);
                        }
                    }
                    if at_base && matches!(self.nodes[u.index()].role, Role::Receiver) {
                        listeners.push(u);
                    }
                }
            }
        }

        let rx = self.air(now, &txs, &listeners);
        let mut acks: Vec<(NodeId, Frame)> = Vec::new();
        for (li, &u) in listeners.iter().enumerate() {
            let decoded = rx[li].and_then(|i| match &txs[i].1.kind {
                FrameKind::Data(d) => Some((txs[i].0, txs[i].1.dst, d)),
                _ => None,
            });
            if u == SINK {
                if let Some((src, dst, d)) = decoded {
                    if self.sink_receive(now, src, dst, d) {
                        let j = self.micro_slot(SINK, true);
                        acks.push((SINK, Frame::ack(SINK, src, Some(0), j)));
                    }
                }
                continue;
            }
            let params = self.cfg.forwarding;
            let node = &mut self.nodes[u.index()];
            let hop = node.topo.hop.expect("listening forwarders have a hop");
            let incoming = decoded.map(|(src, dst, data)| Incoming { src, dst, data });
            let outcome = node
                .receiver
                .receiver_step(incoming, u, hop, &mut node.queue, &params, spec);
            let is_receiver = matches!(node.role, Role::Receiver);
            if let Some((src, _, d)) = decoded {
                let kind = TraceKind::DataRx {
                    msg: d.message.id,
                    from: src,
                    accepted: outcome.accepted,
                };
                self.log(now, u, kind);
            }
            if let Some(stale) = outcome.stale {
                self.metrics.stale_drops += 1;
                self.log(now, u, TraceKind::StaleDrop { msg: stale.message.id });
            }
            if let Some(dst) = outcome.ack {
                let j = self.micro_slot(u, true);
                acks.push((u, Frame::ack(u, dst, Some(hop), j)));
            }
            if outcome.become_sender && is_receiver {
                self.start_sender(u);
            }
        }

        let senders: Vec<NodeId> = outs.iter().map(|(s, _)| *s).collect();
        let ack_rx = self.air(now, &acks, &senders);
        for ((v, out), heard) in outs.into_iter().zip(ack_rx) {
            let ack_from = heard.and_then(|i| match acks[i].1.kind {
                FrameKind::Ack { ack_dst, .. } if ack_dst == v => Some(acks[i].0),
                _ => None,
            });
            let ack_from = if self.ack_blocked(v, now) { None } else { ack_from };
            let caches = self.cfg.strategy.caches_offsets();
            let node = &mut self.nodes[v.index()];
            let Role::Sender(st) = &mut node.role else { continue };
            let target = st.id_next;
            match st.finish_attempt(out, ack_from, &mut node.queue, spec) {
                AttemptOutcome::Delivered { to, newly_matched } => {
                    if newly_matched {
                        node.fruitless_scans = 0;
                        let offset_forth = st.offset_forth;
                        let began = node.scan_began.take();
                        if caches {
                            node.cache = Some((to, offset_forth));
                            node.target = Some(to);
                        }
                        if let Some(b) = began {
                            self.metrics.sync_latencies.push(now.get() - b.get());
                        }
                        self.log(
                            now,
                            v,
                            TraceKind::Matched {
                                next: to,
                                offset_forth,
                                scanned: began.is_some(),
                            },
                        );
                    }
                }
                AttemptOutcome::ScanAdvanced => {
                    self.metrics.scan_cycles += 1;
                    let offset_forth = st.offset_forth;
                    self.log(now, v, TraceKind::ScanStep { target, offset_forth });
                }
                AttemptOutcome::MatchedMiss { consecutive } => {
                    let opportunistic = self.cfg.strategy == Strategy::Otps;
                    if consecutive >= self.cfg.forwarding.miss_limit(spec, opportunistic) {
                        self.handle_failure(v, now);
                    }
                }
            }
        }

        for u in active {
            self.schedule(u, now);
        }
    }
}
