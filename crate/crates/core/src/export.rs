//! File output for runs and sync benchmarks.
//!
//! Every file is written to a temporary sibling first and renamed into place,
//! so readers never see a partial file.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfile::NamedTempFile;

use crate::error::ExportError;
use crate::experiment::{ExperimentConfig, ExperimentRun};
use crate::metrics::{MetricsRecord, Quantiles};
use crate::sync::SyncBench;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `path` atomically through `fill`.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), ExportError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), ExportError>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).map_err(io_err(path))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.persist(path).map_err(|e| ExportError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[derive(Serialize)]
struct MessageCsvRow {
    msg_id: u64,
    src: u32,
    created_slot: u64,
    delivered_slot: Option<u64>,
    hops: Option<u32>,
}

/// `msg_id,src,created_slot,delivered_slot,hops`; undelivered messages leave
/// the last two fields empty.
pub fn write_messages_csv<W: Write>(metrics: &MetricsRecord, out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    for m in &metrics.messages {
        w.serialize(MessageCsvRow {
            msg_id: m.msg_id,
            src: m.src.0,
            created_slot: m.created_slot,
            delivered_slot: m.delivered_slot,
            hops: m.hops,
        })?;
    }
    if metrics.messages.is_empty() {
        w.write_record(["msg_id", "src", "created_slot", "delivered_slot", "hops"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Delivered messages only, with the path as space-separated node ids.
pub fn write_delivery_log<W: Write>(metrics: &MetricsRecord, out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["msg_id", "src_node", "created_slot", "delivered_slot", "hop_count", "path"])?;
    for m in &metrics.messages {
        let (Some(delivered), Some(hops)) = (m.delivered_slot, m.hops) else {
            continue;
        };
        let path: Vec<String> = m.path.iter().map(|n| n.0.to_string()).collect();
        w.write_record([
            m.msg_id.to_string(),
            m.src.0.to_string(),
            m.created_slot.to_string(),
            delivered.to_string(),
            hops.to_string(),
            path.join(" "),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Quantiles converted to seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilesSecs {
    pub p10: Option<f64>,
    pub p50: Option<f64>,
    pub p90: Option<f64>,
    pub p99: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub topo_time_slots: u64,
    pub topo_time_s: f64,
    pub forwarding_start_slot: u64,
    pub end_slot: u64,
    pub end_s: f64,
    pub created: usize,
    pub delivered: usize,
    pub undelivered: usize,
    pub delivery_slots: Quantiles,
    pub delivery_s: QuantilesSecs,
    pub mean_sync_latency_slots: Option<f64>,
    pub mean_sync_latency_s: Option<f64>,
    pub collisions: u64,
    pub scan_cycles: u64,
    pub recoveries: u64,
    pub queue_drops: u64,
    pub stale_drops: u64,
    pub duplicates_at_sink: u64,
}

impl RunSummary {
    pub fn new(config: &ExperimentConfig, m: &MetricsRecord) -> Self {
        let secs = |slots: u64| slots as f64 * config.slot_ms / 1000.0;
        let q = Quantiles::of(m);
        let mean_sync = m.mean_sync_latency();
        Self {
            config: config.clone(),
            topo_time_slots: m.topo_time_slots,
            topo_time_s: secs(m.topo_time_slots),
            forwarding_start_slot: m.forwarding_start_slot,
            end_slot: m.end_slot,
            end_s: secs(m.end_slot),
            created: m.created(),
            delivered: m.delivered(),
            undelivered: m.undelivered,
            delivery_slots: q,
            delivery_s: QuantilesSecs {
                p10: q.p10.map(secs),
                p50: q.p50.map(secs),
                p90: q.p90.map(secs),
                p99: q.p99.map(secs),
            },
            mean_sync_latency_slots: mean_sync,
            mean_sync_latency_s: mean_sync.map(|v| v * config.slot_ms / 1000.0),
            collisions: m.collisions,
            scan_cycles: m.scan_cycles,
            recoveries: m.recoveries,
            queue_drops: m.queue_drops,
            stale_drops: m.stale_drops,
            duplicates_at_sink: m.duplicates_at_sink,
        }
    }

    /// Compact line for terminals.
    pub fn one_line(&self) -> String {
        let c = &self.config;
        let fmt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        format!(
            "{} {} n={} t={} rounds={} seed={} topo={} delivered={}/{} p50={} p90={} collisions={} recoveries={}",
            c.shape.as_str(),
            c.strategy,
            c.nodes,
            c.t,
            c.rounds,
            c.seed,
            self.topo_time_slots,
            self.delivered,
            self.created,
            fmt(self.delivery_slots.p50),
            fmt(self.delivery_slots.p90),
            self.collisions,
            self.recoveries,
        )
    }
}

/// File stem shared by everything one run writes.
pub fn run_stem(cfg: &ExperimentConfig) -> String {
    format!(
        "{}_{}_n{}_t{}_r{}_s{}",
        cfg.shape.as_str(),
        cfg.strategy.as_str(),
        cfg.nodes,
        cfg.t,
        cfg.rounds,
        cfg.seed
    )
}

/// Paths written by [`export_run`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunFiles {
    pub messages: PathBuf,
    pub delivery_log: PathBuf,
    pub summary: PathBuf,
    pub topology: PathBuf,
    pub trace: Option<PathBuf>,
}

pub fn export_run(run: &ExperimentRun, dir: &Path) -> Result<RunFiles, ExportError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stem = run_stem(&run.config);
    let files = RunFiles {
        messages: dir.join(format!("{stem}.messages.csv")),
        delivery_log: dir.join(format!("{stem}.delivery_log.csv")),
        summary: dir.join(format!("{stem}.summary.json")),
        topology: dir.join(format!("{stem}.topology.json")),
        trace: run
            .output
            .trace
            .as_ref()
            .map(|_| dir.join(format!("{stem}.trace.jsonl"))),
    };
    let m = &run.output.metrics;
    write_atomic(&files.messages, |w| write_messages_csv(m, w))?;
    write_atomic(&files.delivery_log, |w| write_delivery_log(m, w))?;
    let summary = RunSummary::new(&run.config, m);
    write_atomic(&files.summary, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        w.write_all(b"\n").map_err(io_err(&files.summary))
    })?;
    write_atomic(&files.topology, |w| {
        serde_json::to_writer_pretty(&mut *w, &run.output.topology.entries)?;
        w.write_all(b"\n").map_err(io_err(&files.topology))
    })?;
    if let (Some(path), Some(trace)) = (&files.trace, &run.output.trace) {
        write_atomic(path, |w| trace.write_jsonl(w).map_err(io_err(path)))?;
    }
    Ok(files)
}

/// `t,mechanism,trial,latency_slots`, one row per sample.
pub fn write_sync_csv<W: Write>(benches: &[SyncBench], out: W) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "mechanism", "trial", "latency_slots"])?;
    for b in benches {
        for s in &b.samples {
            w.write_record([
                s.t.to_string(),
                s.mechanism.as_str().to_string(),
                s.trial.to_string(),
                s.latency_slots.to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
