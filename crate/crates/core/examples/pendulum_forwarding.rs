//! Follows one relay through a run: one scan to find its next hop, then only
//! cached swings.
//!
//! cargo run --release --example pendulum_forwarding

use icnet::trace::TraceKind;
use icnet::{run_experiment, ExperimentConfig, NodeId, SINK};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig {
        t: 20,
        rounds: 4,
        trace: true,
        ..ExperimentConfig::default()
    };
    let run = run_experiment(&cfg)?;
    let trace = run.output.trace.as_ref().expect("trace enabled");

    // The relay that forwarded the most messages, excluding the sink's neighbours.
    let mut relayed = vec![0usize; run.scenario.len()];
    for m in &run.output.metrics.messages {
        for n in m.path.iter().skip(1) {
            relayed[n.index()] += 1;
        }
    }
    let relay = (1..run.scenario.len())
        .map(|i| NodeId(i as u32))
        .filter(|&n| run.output.topology.hop(n).is_some_and(|h| h >= 2))
        .max_by_key(|n| relayed[n.index()])
        .ok_or("no multi-hop relay")?;
    let next = run.output.topology.next_hop(relay).unwrap_or(SINK);
    println!(
        "node {} (hop {:?}) relays {} messages towards node {}",
        relay.0,
        run.output.topology.hop(relay),
        relayed[relay.index()],
        next.0
    );

    let (mut scans, mut sends, mut batches, mut matched) = (0, 0, 0, false);
    let mut swings = std::collections::BTreeSet::new();
    for e in trace.for_node(relay) {
        match &e.kind {
            TraceKind::ScanStep { .. } => scans += 1,
            TraceKind::ScanExhausted => println!("  slot {:>6}: scan found nobody, back to listening", e.slot.get()),
            TraceKind::Matched { next, offset_forth, scanned } => {
                matched = true;
                println!(
                    "  slot {:>6}: matched node {} at swing {} ({})",
                    e.slot.get(),
                    next.0,
                    offset_forth,
                    if *scanned { "after scanning" } else { "from cache" }
                );
            }
            TraceKind::DataTx { offset_forth, is_end, .. } => {
                sends += 1;
                if matched {
                    swings.insert(*offset_forth);
                }
                batches += usize::from(*is_end);
            }
            _ => {}
        }
    }
    println!("  {sends} transmissions in {batches} batches, {scans} scan steps; swings after the match {swings:?}");
    let m = &run.output.metrics;
    println!(
        "network: {}/{} delivered, median {} slots",
        m.delivered(),
        m.created(),
        m.median_delivery().map_or("-".into(), |v| v.to_string())
    );
    Ok(())
}
