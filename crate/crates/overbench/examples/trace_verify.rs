//! Runs the full pipeline (workload -> probe -> queue -> binary trace) and
//! then verifies the file: record counts, per-trace order completeness, and
//! signature resolution.
//!
//! ```bash
//! cargo run --example trace_verify
//! ```

use overbench::probe::{verify_trace_file, ProbeKind};
use overbench::runner::{run_benchmark, RunConfig};
use overbench::workload::WorkloadConfig;

fn main() -> overbench::Result<()> {
    let out = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        loop_starts: 2,
        calls_per_loop: 1_000,
        workers: 2,
        probe_kind: ProbeKind::BinaryWriter,
        workload: WorkloadConfig::new(10, 0, "exampleMethod()")?,
        output_dir: out.path().to_path_buf(),
        ..RunConfig::default()
    };
    let completed = run_benchmark(&cfg)?;
    println!(
        "ran {} loop starts, {} workers x {} calls at depth {}",
        cfg.loop_starts,
        cfg.workers,
        cfg.calls_per_loop,
        cfg.workload.recursion_depth()
    );
    println!("expected records per trace file: {}", cfg.expected_records_per_loop());
    println!();

    for path in &completed.trace_paths {
        let report = verify_trace_file(path)?;
        println!(
            "{}: {} records in {} traces, {} registry entries, clean = {}",
            path.file_name().unwrap().to_string_lossy(),
            report.records,
            report.traces,
            report.registry_entries,
            report.is_clean()
        );
    }

    // The runner already verified each file before accepting the loop; a
    // trace that failed verification would have aborted the run.
    println!();
    println!("raw run file: {}", completed.raw_path.display());
    Ok(())
}
