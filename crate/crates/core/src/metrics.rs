//! Per-run measurements and their summaries.

use serde::{Deserialize, Serialize};

use crate::slot::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRow {
    pub msg_id: u64,
    pub src: NodeId,
    pub seq: u32,
    pub created_slot: u64,
    pub delivered_slot: Option<u64>,
    /// Links traversed, counted on the copy that reached the sink first.
    pub hops: Option<u32>,
    pub path: Vec<NodeId>,
}

impl MessageRow {
    pub fn delivery_time(&self) -> Option<u64> {
        self.delivered_slot.map(|d| d - self.created_slot)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub topo_time_slots: u64,
    pub forwarding_start_slot: u64,
    pub end_slot: u64,
    pub messages: Vec<MessageRow>,
    /// Slots from first scan attempt to match, one entry per completed scan.
    pub sync_latencies: Vec<u64>,
    /// Failed unmatched attempts, i.e. cycles spent scanning.
    pub scan_cycles: u64,
    pub collisions: u64,
    pub undelivered: usize,
    /// Own readings discarded because the queue was full.
    pub queue_drops: u64,
    /// Copies discarded after the sender picked another receiver.
    pub stale_drops: u64,
    pub duplicates_at_sink: u64,
    pub recoveries: u64,
    pub protocol_errors: u64,
    /// Messages still sitting in some queue when the run stopped.
    pub residual_queued: usize,
    /// Messages lost with a failed node.
    pub lost_in_failures: usize,
}

impl MetricsRecord {
    pub fn created(&self) -> usize {
        self.messages.len()
    }

    pub fn delivered(&self) -> usize {
        self.messages.iter().filter(|m| m.delivered_slot.is_some()).count()
    }

    pub fn delivery_times(&self) -> Vec<u64> {
        self.messages.iter().filter_map(MessageRow::delivery_time).collect()
    }

    pub fn mean_sync_latency(&self) -> Option<f64> {
        if self.sync_latencies.is_empty() {
            return None;
        }
        Some(self.sync_latencies.iter().sum::<u64>() as f64 / self.sync_latencies.len() as f64)
    }

    /// Delivery-time quantile over created messages; undelivered ones count
    /// as later than any delivered one.
    pub fn delivery_quantile(&self, q: f64) -> Option<u64> {
        censored_quantile(&self.delivery_times(), self.created(), q)
    }

    pub fn median_delivery(&self) -> Option<u64> {
        self.delivery_quantile(0.5)
    }
}

/// Empirical CDF point: `fraction` of all created messages arrived within
/// `latency` slots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub latency: u64,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub points: Vec<CdfPoint>,
    /// Set when nothing was delivered at all.
    pub zero_delivered: bool,
}

/// Right-continuous empirical CDF of delivery times. The last step reaches
/// `delivered / created`, so undelivered messages show up as a plateau.
pub fn compute_cdf(delivery_times: &[u64], created: usize) -> Cdf {
    if delivery_times.is_empty() || created == 0 {
        return Cdf {
            points: Vec::new(),
            zero_delivered: true,
        };
    }
    let total = created.max(delivery_times.len()) as f64;
    let mut sorted = delivery_times.to_vec();
    sorted.sort_unstable();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / total;
        match points.last_mut() {
            Some(p) if p.latency == v => p.fraction = fraction,
            _ => points.push(CdfPoint { latency: v, fraction }),
        }
    }
    Cdf {
        points,
        zero_delivered: false,
    }
}

/// Nearest-rank quantile where `created - values.len()` censored entries sit
/// above every observed value. `None` if the rank falls among them.
pub fn censored_quantile(values: &[u64], created: usize, q: f64) -> Option<u64> {
    let n = created.max(values.len());
    if n == 0 {
        return None;
    }
    let rank = ((q.clamp(0.0, 1.0) * n as f64).ceil() as usize).max(1);
    if rank > values.len() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    Some(sorted[rank - 1])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p10: Option<u64>,
    pub p50: Option<u64>,
    pub p90: Option<u64>,
    pub p99: Option<u64>,
}

impl Quantiles {
    pub fn of(record: &MetricsRecord) -> Self {
        Self {
            p10: record.delivery_quantile(0.10),
            p50: record.delivery_quantile(0.50),
            p90: record.delivery_quantile(0.90),
            p99: record.delivery_quantile(0.99),
        }
    }
}

pub fn median_u64(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    })
}
