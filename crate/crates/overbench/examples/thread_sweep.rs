//! Duration and noise evolution with worker count, for both probe kinds —
//! the data series behind "how does the pipeline behave under parallel
//! load?" plots.
//!
//! ```bash
//! cargo run --release --example thread_sweep
//! ```

use overbench::probe::ProbeKind;
use overbench::runner::{run_thread_sweep, RunConfig};
use overbench::workload::WorkloadConfig;

fn main() -> overbench::Result<()> {
    let out = tempfile::tempdir().expect("tempdir");
    let worker_counts = [1usize, 2, 4];
    let base = RunConfig {
        loop_starts: 3,
        calls_per_loop: 5_000,
        warmup_fraction: 0.5,
        workload: WorkloadConfig::new(10, 0, "exampleMethod()")?,
        output_dir: out.path().to_path_buf(),
        keep_traces: false,
        ..RunConfig::default()
    };

    println!("workers,probe,mean_ns,stddev_ns,rel_stddev");
    for probe_kind in [ProbeKind::Baseline, ProbeKind::BinaryWriter] {
        let outcome = run_thread_sweep(
            &RunConfig {
                probe_kind,
                ..base.clone()
            },
            &worker_counts,
        )?;
        for completed in &outcome.completed {
            // loop-mean basis: run-to-run noise, not per-call scheduling tails
            let s = completed.run.summaries()?;
            println!(
                "{},{},{:.2},{:.2},{:.4}",
                completed.run.config.workers,
                probe_kind.flag_name(),
                s.per_loop.mean_ns,
                s.per_loop.stddev_ns,
                s.per_loop.rel_stddev * 100.0
            );
        }
        if let Some((workers, e)) = &outcome.failure {
            eprintln!("sweep stopped at {workers} workers: {e} (completed runs kept)");
        }
    }
    Ok(())
}
