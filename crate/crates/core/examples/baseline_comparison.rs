//! Median delivery time of the four forwarding strategies on shared seeds.
//!
//! cargo run --release --example baseline_comparison [seeds]

use icnet::experiment::seed_sweep;
use icnet::metrics::censored_quantile;
use icnet::{ExperimentConfig, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let base = ExperimentConfig {
        seed: 100,
        ..ExperimentConfig::default()
    };
    println!("square-50, t=50, two rounds, {seeds} seeds");
    for strategy in Strategy::ALL {
        let (mut times, mut created, mut scans) = (Vec::new(), 0, 0);
        for run in seed_sweep(&base.with_strategy(strategy), seeds) {
            let m = run?.output.metrics;
            times.extend(m.delivery_times());
            created += m.created();
            scans += m.scan_cycles;
        }
        let q = |p| censored_quantile(&times, created, p).map_or("-".into(), |v: u64| v.to_string());
        println!(
            "{strategy:<5} p50 {:>7}  p90 {:>7}  delivered {}/{}  scan cycles {}",
            q(0.5),
            q(0.9),
            times.len(),
            created,
            scans
        );
    }
    Ok(())
}
