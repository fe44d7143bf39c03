//! Append-only run history, the CI-compatible JSON export, and both
//! regression policies.
//!
//! ```bash
//! cargo run --example history_export
//! ```

use overbench::history::{
    append_run, check_regression, export_gab_json, load_history, RegressionPolicy,
};
use overbench::probe::ProbeKind;
use overbench::runner::{run_benchmark, RunConfig};
use overbench::workload::WorkloadConfig;

fn main() -> overbench::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let history_path = dir.path().join("bench-history.json");
    let cfg = RunConfig {
        loop_starts: 3,
        calls_per_loop: 5_000,
        probe_kind: ProbeKind::Baseline,
        workload: WorkloadConfig::new(10, 0, "exampleMethod()")?,
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };

    // Two commits land, one run each.
    let first = run_benchmark(&cfg)?;
    append_run(&history_path, &first.run, "commit-aaaa")?;
    let second = run_benchmark(&cfg)?;
    append_run(&history_path, &second.run, "commit-bbbb")?;

    let history = load_history(&history_path)?;
    println!("history entries: {}", history.entries.len());
    for entry in &history.entries {
        let b = &entry.benchmarks[0];
        println!(
            "  {}  {}  {:.2} {} {}",
            entry.commit_id, b.name, b.value, b.unit, b.range
        );
    }

    println!();
    println!("benchmark-action export of the latest run:");
    let export = export_gab_json(&[&second.run])?;
    println!("{}", serde_json::to_string_pretty(&export).expect("render JSON"));

    println!();
    for (label, policy) in [
        ("ratio 2.0", RegressionPolicy::Ratio(2.0)),
        ("statistical alpha=0.01", RegressionPolicy::Statistical(0.01)),
    ] {
        let report = check_regression(&history, policy)?;
        println!(
            "{label}: {} alert(s){}",
            report.alerts.len(),
            if report.alerts.is_empty() { " (same code, as expected)" } else { "" }
        );
        for alert in &report.alerts {
            println!("  {}", alert.message);
        }
    }
    Ok(())
}
