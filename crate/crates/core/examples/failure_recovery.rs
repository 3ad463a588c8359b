//! Kills a busy relay mid-run and compares how RICS and OTPS route around it.
//!
//! cargo run --release --example failure_recovery

use icnet::engine::NodeKill;
use icnet::trace::TraceKind;
use icnet::{run_experiment, ExperimentConfig, FaultPlan, NodeId, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ExperimentConfig {
        t: 20,
        rounds: 6,
        seed: 3,
        trace: true,
        ..ExperimentConfig::default()
    };
    let clean = run_experiment(&base)?;
    let mut load = vec![0usize; clean.scenario.len()];
    for m in &clean.output.metrics.messages {
        for n in m.path.iter().skip(1) {
            load[n.index()] += 1;
        }
    }
    // Busiest relay whose children all have another neighbour one hop closer.
    let topo = &clean.output.topology;
    let adj = clean.scenario.adjacency();
    let replaceable = |v: NodeId| {
        (1..load.len()).map(|i| NodeId(i as u32)).filter(|&c| topo.next_hop(c) == Some(v)).all(|c| {
            adj[c.index()]
                .iter()
                .any(|&o| o != v && topo.hop(o).zip(topo.hop(c)).is_some_and(|(ho, hc)| ho < hc))
        })
    };
    let victim = (1..load.len())
        .map(|i| NodeId(i as u32))
        .filter(|&v| replaceable(v))
        .max_by_key(|v| load[v.index()])
        .ok_or("every relay is a cut vertex")?;
    println!("killing node {} (carried {} messages) 2000 slots into forwarding", victim.0, load[victim.index()]);

    for strategy in [Strategy::Rics, Strategy::Otps] {
        let cfg = ExperimentConfig {
            strategy,
            faults: FaultPlan {
                kills: vec![NodeKill { node: victim, after: 2000 }],
                ..FaultPlan::default()
            },
            ..base.clone()
        };
        let run = run_experiment(&cfg)?;
        let m = &run.output.metrics;
        let trace = run.output.trace.as_ref().unwrap();
        let failures = trace.events.iter().filter(|e| matches!(e.kind, TraceKind::Failure { .. })).count();
        let rematched = trace
            .events
            .iter()
            .filter(|e| matches!(e.kind, TraceKind::Matched { next, .. } if next != victim))
            .count();
        println!(
            "{strategy}: {} failures detected, {} recoveries, {} matches, delivered {}/{} ({} lost with the node)",
            failures,
            m.recoveries,
            rematched,
            m.delivered(),
            m.created(),
            m.lost_in_failures
        );
    }
    Ok(())
}
