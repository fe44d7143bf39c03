//! Two-run change decision: is version B slower than version A, or is the
//! difference within this environment's noise?
//!
//! ```bash
//! cargo run --release --example compare_runs
//! ```

use overbench::probe::ProbeKind;
use overbench::runner::{run_benchmark, RunConfig};
use overbench::stats::{detect_change, minimal_detectable_change, MdeConfig};
use overbench::workload::WorkloadConfig;

fn main() -> overbench::Result<()> {
    let out = tempfile::tempdir().expect("tempdir");
    let cfg = RunConfig {
        loop_starts: 5,
        calls_per_loop: 20_000,
        probe_kind: ProbeKind::Baseline,
        workload: WorkloadConfig::new(10, 0, "exampleMethod()")?,
        output_dir: out.path().to_path_buf(),
        ..RunConfig::default()
    };

    // "Version A" and "version B" are the same code here, so the decision
    // should come out unchanged; a slowed-down B is simulated below.
    let a = run_benchmark(&cfg)?.run.summaries()?;
    let b = run_benchmark(&cfg)?.run.summaries()?;

    let decision = detect_change(&a.loop_means_ns, &b.loop_means_ns, 0.01)?;
    println!(
        "same code twice:      changed = {:<5} ({:+.3}%, p = {:.3})",
        decision.changed,
        decision.relative_change * 100.0,
        decision.p_value
    );

    let mde = minimal_detectable_change(
        a.per_loop.rel_stddev,
        &MdeConfig { n: cfg.loop_starts, ..MdeConfig::default() },
    )?;
    println!(
        "this setup can detect changes of about {:.2}% (sigma {:.2}%, n {})",
        mde * 100.0,
        a.per_loop.rel_stddev * 100.0,
        cfg.loop_starts
    );

    // Simulate a regression three times the minimal detectable change by
    // scaling B's loop means.
    let slowed: Vec<f64> = b.loop_means_ns.iter().map(|m| m * (1.0 + 3.0 * mde)).collect();
    let decision = detect_change(&a.loop_means_ns, &slowed, 0.01)?;
    println!(
        "B slowed by 3 delta:  changed = {:<5} ({:+.3}%, p = {:.3e})",
        decision.changed,
        decision.relative_change * 100.0,
        decision.p_value
    );
    Ok(())
}
