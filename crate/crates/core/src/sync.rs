//! Working-time synchronization between a sender and a reactive receiver.
//!
//! The sender shifts its working slot one position later in every cycle
//! until it shares a slot with the receiver. Since an offset difference is at
//! most `t`, alignment happens within `t` shifts, i.e. `t * (t + 1)` slots.
//! A one-sided geometric random-delay scan is kept for comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_rng_stream, Purpose, Stream};
use crate::slot::{delay_offset, ChargingSpec, NodeId, SlotTime, WorkOffset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncScanState {
    /// Cycles scanned so far without a match.
    pub attempts: u32,
    pub current_offset: WorkOffset,
    pub origin_offset: WorkOffset,
    pub matched: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanStep {
    Matched,
    Advanced,
    /// All `t + 1` offsets were tried; the receiver is absent.
    Exhausted,
}

impl SyncScanState {
    pub fn new(origin: WorkOffset) -> Self {
        Self {
            attempts: 0,
            current_offset: origin,
            origin_offset: origin,
            matched: false,
        }
    }

    pub fn step(&mut self, decoded_ack: bool, spec: ChargingSpec) -> ScanStep {
        if self.matched || decoded_ack {
            self.matched = true;
            return ScanStep::Matched;
        }
        if self.attempts >= spec.t() {
            self.attempts = spec.t() + 1;
            return ScanStep::Exhausted;
        }
        self.attempts += 1;
        self.current_offset = delay_offset(self.current_offset, spec);
        ScanStep::Advanced
    }
}

/// Free-function form of [`SyncScanState::step`].
pub fn scan_step(state: SyncScanState, decoded_ack: bool, spec: ChargingSpec) -> (SyncScanState, ScanStep) {
    let mut s = state;
    let step = s.step(decoded_ack, spec);
    (s, step)
}

/// Shift count `(o_r - o_s) mod (t + 1)` needed to reach the receiver.
pub fn offset_distance(sender: WorkOffset, receiver: WorkOffset, spec: ChargingSpec) -> u32 {
    let cyc = spec.cycle_len() as u32;
    (receiver.value() + cyc - sender.value()) % cyc
}

/// Slot index, counted from slot 0, of the first slot in which a scanning
/// sender and the receiver are both awake.
pub fn closed_form_latency(sender: WorkOffset, receiver: WorkOffset, spec: ChargingSpec) -> u64 {
    let d = offset_distance(sender, receiver, spec) as u64;
    d * spec.cycle_len() + receiver.value() as u64
}

/// Mean of [`closed_form_latency`] under uniform independent offsets.
pub fn expected_scan_latency(spec: ChargingSpec) -> f64 {
    let t = spec.t() as f64;
    t / 2.0 * (t + 1.0) + t / 2.0
}

pub fn random_offset(rng: &mut Stream, spec: ChargingSpec) -> WorkOffset {
    WorkOffset::wrapping(rng.gen_range(0..spec.cycle_len()), spec)
}

/// Monte-Carlo mean of the deterministic scan latency.
pub fn mean_scan_latency(spec: ChargingSpec, trials: usize, rng: &mut Stream) -> f64 {
    assert!(trials > 0, "at least one trial");
    let total: u64 = (0..trials)
        .map(|_| {
            let s = random_offset(rng, spec);
            let r = random_offset(rng, spec);
            closed_form_latency(s, r, spec)
        })
        .sum();
    total as f64 / trials as f64
}

/// Delay decision source of the geometric baseline.
pub trait DelayCoin {
    fn delay(&mut self) -> bool;
}

pub struct Bernoulli<'a> {
    pub p: f64,
    pub rng: &'a mut Stream,
}

impl DelayCoin for Bernoulli<'_> {
    fn delay(&mut self) -> bool {
        self.rng.gen_bool(self.p)
    }
}

/// Coin that never delays.
pub struct NeverDelay;

impl DelayCoin for NeverDelay {
    fn delay(&mut self) -> bool {
        false
    }
}

/// One cycle of the geometric baseline: on a miss the sender delays by one
/// slot with probability `p`, otherwise it keeps its offset.
pub fn geometric_baseline_step(
    state: SyncScanState,
    decoded_ack: bool,
    coin: &mut impl DelayCoin,
    spec: ChargingSpec,
) -> SyncScanState {
    let mut s = state;
    if s.matched || decoded_ack {
        s.matched = true;
        return s;
    }
    s.attempts += 1;
    if coin.delay() {
        s.current_offset = delay_offset(s.current_offset, spec);
    }
    s
}

/// Runs the geometric baseline against a receiver for at most `max_cycles`
/// and returns the first common slot.
pub fn geometric_latency(
    sender: WorkOffset,
    receiver: WorkOffset,
    spec: ChargingSpec,
    coin: &mut impl DelayCoin,
    max_cycles: u64,
) -> Option<u64> {
    let mut state = SyncScanState::new(sender);
    for cycle in 0..max_cycles {
        let aligned = state.current_offset == receiver;
        if aligned {
            return Some(receiver.slot_in_cycle(cycle, spec).get());
        }
        state = geometric_baseline_step(state, false, coin, spec);
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMechanism {
    Scan,
    Geometric,
}

impl SyncMechanism {
    pub fn as_str(self) -> &'static str {
        match self {
            SyncMechanism::Scan => "scan",
            SyncMechanism::Geometric => "geometric",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub t: u32,
    pub mechanism: SyncMechanism,
    pub trial: usize,
    pub latency_slots: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub max: u64,
    /// Trials that never aligned within the horizon.
    pub censored: usize,
}

pub fn summarize(values: &[u64], censored: usize) -> Summary {
    let n = values.len().max(1) as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let variance = values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n;
    Summary {
        mean,
        variance,
        max: values.iter().copied().max().unwrap_or(0),
        censored,
    }
}

/// Side-by-side sample of both mechanisms over the same offset pairs.
#[derive(Clone, Debug)]
pub struct SyncBench {
    pub t: u32,
    pub p: f64,
    pub samples: Vec<LatencySample>,
    pub scan: Summary,
    pub geometric: Summary,
}

/// Horizon for geometric trials, in cycles.
pub fn geometric_horizon(spec: ChargingSpec) -> u64 {
    200 * spec.cycle_len()
}

pub fn run_sync_bench(spec: ChargingSpec, trials: usize, p: f64, seed: u64) -> SyncBench {
    let mut pairs = derive_rng_stream(seed, NodeId(0), Purpose::SyncBench);
    let mut coin_rng = derive_rng_stream(seed, NodeId(0), Purpose::Geometric);
    let mut samples = Vec::with_capacity(trials * 2);
    let mut scan = Vec::with_capacity(trials);
    let mut geo = Vec::with_capacity(trials);
    let mut censored = 0;
    let horizon = geometric_horizon(spec);
    for trial in 0..trials {
        let s = random_offset(&mut pairs, spec);
        let r = random_offset(&mut pairs, spec);
        let det = closed_form_latency(s, r, spec);
        scan.push(det);
        samples.push(LatencySample {
            t: spec.t(),
            mechanism: SyncMechanism::Scan,
            trial,
            latency_slots: det,
        });
        let mut coin = Bernoulli {
            p,
            rng: &mut coin_rng,
        };
        match geometric_latency(s, r, spec, &mut coin, horizon) {
            Some(l) => {
                geo.push(l);
                samples.push(LatencySample {
                    t: spec.t(),
                    mechanism: SyncMechanism::Geometric,
                    trial,
                    latency_slots: l,
                });
            }
            None => censored += 1,
        }
    }
    SyncBench {
        t: spec.t(),
        p,
        samples,
        scan: summarize(&scan, 0),
        geometric: summarize(&geo, censored),
    }
}

/// Grid search over `p` in `{0.1, ..., 0.9}` for the lowest geometric
/// latency variance.
pub fn best_geometric_p(spec: ChargingSpec, trials: usize, seed: u64) -> f64 {
    let mut best = (f64::INFINITY, 0.5);
    for k in 1..=9 {
        let p = k as f64 / 10.0;
        let bench = run_sync_bench(spec, trials, p, seed);
        if bench.geometric.censored == 0 && bench.geometric.variance < best.0 {
            best = (bench.geometric.variance, p);
        }
    }
    best.1
}

/// Slots between `start` and the first slot ≥ `start` at which both nodes are
/// awake while the sender scans; helper for engines that start mid-run.
pub fn scan_latency_from(
    start: SlotTime,
    sender: WorkOffset,
    receiver: WorkOffset,
    spec: ChargingSpec,
) -> u64 {
    let first_cycle = start.cycle(spec) + u64::from(sender.slot_in_cycle(start.cycle(spec), spec) < start);
    let d = offset_distance(sender, receiver, spec) as u64;
    receiver.slot_in_cycle(first_cycle + d, spec).get() - start.get()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(t: u32) -> ChargingSpec {
        ChargingSpec::new(t).unwrap()
    }

    fn off(v: u32, s: ChargingSpec) -> WorkOffset {
        WorkOffset::new(v, s).unwrap()
    }

    /// Two-node slot simulation: the sender occupies offset `o_s + k` in
    /// cycle `k`; returns the first slot where both are awake.
    fn brute_force(o_s: u32, o_r: u32, t: u32) -> (u64, u32) {
        let cyc = t as u64 + 1;
        for slot in 0.. {
            let cycle = slot / cyc;
            let sender_at = (o_s as u64 + cycle) % cyc;
            if slot % cyc == sender_at && slot % cyc == o_r as u64 {
                return (slot, cycle as u32);
            }
            assert!(cycle <= cyc, "no alignment");
        }
        unreachable!()
    }

    #[test]
    fn scan_examples() {
        let s = spec(5);
        let st = SyncScanState::new(off(0, s));
        assert_eq!(scan_step(st, true, s).1, ScanStep::Matched);
        assert_eq!(scan_step(st, true, s).0.attempts, 0);

        // receiver at 3: ack arrives once the sender's offset reaches 3
        let mut st = SyncScanState::new(off(0, s));
        while st.current_offset != off(3, s) {
            assert_eq!(st.step(false, s), ScanStep::Advanced);
        }
        assert_eq!(st.step(true, s), ScanStep::Matched);
        assert_eq!(st.attempts, 3);
        assert_eq!(brute_force(0, 3, 5).1, 3);
    }

    #[test]
    fn scan_exhausts_after_all_offsets() {
        let s = spec(5);
        let mut st = SyncScanState::new(off(2, s));
        let mut seen = vec![st.current_offset.value()];
        for _ in 0..5 {
            assert_eq!(st.step(false, s), ScanStep::Advanced);
            seen.push(st.current_offset.value());
        }
        assert_eq!(st.step(false, s), ScanStep::Exhausted);
        assert_eq!(st.attempts, 6);
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn closed_form_examples() {
        let s = spec(5);
        assert_eq!(closed_form_latency(off(4, s), off(4, s), s), 4);
        assert_eq!(closed_form_latency(off(0, s), off(3, s), s), 21);
        assert_eq!(brute_force(0, 3, 5).0, 21);
    }

    #[test]
    fn closed_form_matches_brute_force_small_t() {
        for t in 1..=12 {
            for a in 0..=t {
                for b in 0..=t {
                    let s = spec(t);
                    assert_eq!(
                        closed_form_latency(off(a, s), off(b, s), s),
                        brute_force(a, b, t).0,
                        "t={t} o_s={a} o_r={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn analytic_expectation_matches_enumeration() {
        for t in [1u32, 5, 17] {
            let s = spec(t);
            let mut total = 0u64;
            for a in 0..=t {
                for b in 0..=t {
                    total += closed_form_latency(off(a, s), off(b, s), s);
                }
            }
            let exact = total as f64 / ((t as f64 + 1.0).powi(2));
            assert!((exact - expected_scan_latency(s)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn geometric_is_reproducible() {
        let s = spec(5);
        let run = || {
            let mut rng = derive_rng_stream(9, NodeId(0), Purpose::Geometric);
            let mut coin = Bernoulli { p: 0.5, rng: &mut rng };
            geometric_latency(off(0, s), off(3, s), s, &mut coin, 10_000)
        };
        let a = run();
        assert!(a.is_some());
        assert_eq!(a, run());
    }

    #[test]
    fn never_delaying_never_matches() {
        let s = spec(5);
        assert_eq!(geometric_latency(off(0, s), off(3, s), s, &mut NeverDelay, 1000), None);
        assert_eq!(geometric_latency(off(3, s), off(3, s), s, &mut NeverDelay, 1000), Some(3));
    }

    #[test]
    fn scan_latency_from_slot_zero_is_closed_form() {
        let s = spec(7);
        for a in 0..=7 {
            for b in 0..=7 {
                assert_eq!(
                    scan_latency_from(SlotTime(0), off(a, s), off(b, s), s),
                    closed_form_latency(off(a, s), off(b, s), s)
                );
            }
        }
    }
}
