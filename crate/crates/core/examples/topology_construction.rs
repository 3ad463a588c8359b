//! Builds the least-hop tree for a few deployments and checks it against BFS.
//!
//! cargo run --release --example topology_construction

use icnet::topology::{bfs_oracle, verify_least_hop};
use icnet::{run_experiment, ExperimentConfig, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for shape in [Shape::Square, Shape::Rectangle] {
        for t in [5, 50] {
            let cfg = ExperimentConfig {
                shape,
                t,
                rounds: 0,
                ..ExperimentConfig::default()
            };
            let run = run_experiment(&cfg)?;
            let topo = &run.output.topology;
            let oracle = bfs_oracle(&run.scenario);
            let depth = topo.entries.iter().filter_map(|e| e.hop).max().unwrap_or(0);
            let verdict = match verify_least_hop(topo, &oracle, &run.scenario) {
                Ok(()) => "least-hop tree".to_string(),
                Err(v) => format!("{} violations, first at node {}", v.len(), v[0].node().0),
            };
            println!(
                "{shape:<9} t={t:<3} depth={depth:<2} topo_time={} slots ({:.2} s): {verdict}",
                run.output.metrics.topo_time_slots,
                run.output.metrics.topo_time_slots as f64 * cfg.slot_ms / 1000.0,
            );
        }
    }
    Ok(())
}
