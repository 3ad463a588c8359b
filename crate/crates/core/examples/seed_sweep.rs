//! Runs a seed sweep in parallel, writes every run's files and prints the
//! pooled delivery-time CDF.
//!
//! cargo run --release --example seed_sweep [out_dir]

use std::path::PathBuf;

use icnet::experiment::seed_sweep;
use icnet::export::{export_run, RunSummary};
use icnet::metrics::compute_cdf;
use icnet::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "runs/sweep".into()).into();
    let base = ExperimentConfig::default();
    let (mut times, mut created) = (Vec::new(), 0);
    for run in seed_sweep(&base, 8) {
        let run = run?;
        export_run(&run, &out)?;
        println!("{}", RunSummary::new(&run.config, &run.output.metrics).one_line());
        times.extend(run.output.metrics.delivery_times());
        created += run.output.metrics.created();
    }
    let cdf = compute_cdf(&times, created);
    println!("pooled CDF over {created} messages:");
    for target in [0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        if let Some(p) = cdf.points.iter().find(|p| p.fraction >= target - 1e-12) {
            println!("  {:>5.0}% within {:>6} slots", target * 100.0, p.latency);
        }
    }
    println!("files in {}", out.display());
    Ok(())
}
