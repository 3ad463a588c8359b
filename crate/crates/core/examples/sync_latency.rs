//! Deterministic scan versus a randomized wake-up rule, over random offset pairs.
//!
//! cargo run --release --example sync_latency

use icnet::sync::{best_geometric_p, closed_form_latency, expected_scan_latency, run_sync_bench};
use icnet::{ChargingSpec, WorkOffset};

fn main() -> Result<(), icnet::ConfigError> {
    let spec = ChargingSpec::new(4)?;
    let s = WorkOffset::new(3, spec)?;
    let r = WorkOffset::new(1, spec)?;
    println!(
        "t=4, sender at 3, receiver at 1: aligned after {} slots (bound {})",
        closed_form_latency(s, r, spec),
        4 * 5
    );

    for t in [5, 50, 120, 500] {
        let spec = ChargingSpec::new(t)?;
        let p = best_geometric_p(spec, 1_000, 1);
        let b = run_sync_bench(spec, 10_000, p, 1);
        println!(
            "t={t:<3} scan mean {:>9.1} (analytic {:>9.1}) max {:>7} | random p={p:.1} mean {:>9.1} max {:>7}",
            b.scan.mean,
            expected_scan_latency(spec),
            b.scan.max,
            b.geometric.mean,
            b.geometric.max,
        );
    }
    Ok(())
}
