//! Baseline vs. binary-writer probe: what does the observability pipeline
//! cost per monitored call on this machine?
//!
//! ```bash
//! cargo run --release --example measure_overhead
//! ```

use overbench::probe::ProbeKind;
use overbench::runner::{run_benchmark, RunConfig};
use overbench::stats::detect_change;
use overbench::workload::WorkloadConfig;

fn main() -> overbench::Result<()> {
    let out = tempfile::tempdir().expect("tempdir");
    let base = RunConfig {
        loop_starts: 5,
        calls_per_loop: 20_000,
        warmup_fraction: 0.5,
        workload: WorkloadConfig::new(10, 0, "exampleMethod()")?,
        output_dir: out.path().to_path_buf(),
        keep_traces: false,
        ..RunConfig::default()
    };

    println!("measuring baseline (no-op probe)...");
    let baseline = run_benchmark(&RunConfig {
        probe_kind: ProbeKind::Baseline,
        ..base.clone()
    })?;
    println!("measuring binary writer (records through queue to file)...");
    let writer = run_benchmark(&RunConfig {
        probe_kind: ProbeKind::BinaryWriter,
        ..base
    })?;

    let s_base = baseline.run.summaries()?;
    let s_writer = writer.run.summaries()?;
    println!();
    println!(
        "baseline       {:>10.2} ns/call  (sigma {:.2}%)",
        s_base.per_call.mean_ns,
        s_base.per_loop.rel_stddev * 100.0
    );
    println!(
        "binary writer  {:>10.2} ns/call  (sigma {:.2}%)",
        s_writer.per_call.mean_ns,
        s_writer.per_loop.rel_stddev * 100.0
    );
    println!(
        "overhead       {:>10.2} ns/call ({:.1}x)",
        s_writer.per_call.mean_ns - s_base.per_call.mean_ns,
        s_writer.per_call.mean_ns / s_base.per_call.mean_ns
    );

    let decision = detect_change(&s_base.loop_means_ns, &s_writer.loop_means_ns, 0.01)?;
    println!(
        "difference is {} at alpha 0.01 (p = {:.3e})",
        if decision.changed { "significant" } else { "not significant" },
        decision.p_value
    );
    Ok(())
}
