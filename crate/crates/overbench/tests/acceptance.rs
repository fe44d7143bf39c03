//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (`cargo test --test acceptance -- --nocapture` to watch).
//!
//! Absolute nanosecond numbers are machine-specific, so the criteria check
//! exact statistical reproduction, delivery guarantees, and detection power
//! rather than absolute timings.

mod common;

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use overbench::history::{
    self, check_regression, GabBenchmark, HistoryEntry, HistoryFile, RegressionPolicy,
    HISTORY_SCHEMA_VERSION,
};
use overbench::probe::{
    verify_trace_file, BoundedRecordQueue, MonitoringRecord, ProbeKind, PutStrategy,
    PutStrategyKind, StringRegistry, TraceWriter,
};
use overbench::runner::{self, load_raw_run, RunConfig};
use overbench::stats::{
    detect_change, minimal_detectable_change, normal_quantile, summarize, MdeConfig, SampleBasis,
};
use overbench::workload::WorkloadConfig;

// Criteria run one at a time: the timing-sensitive ones must not share the
// machine with the delivery storms.
static SUITE: std::sync::Mutex<()> = std::sync::Mutex::new(());

fn criterion<F: FnOnce() + UnwindSafe>(id: &str, f: F) {
    let guard = SUITE.lock().unwrap_or_else(|poisoned| poisoned.into_inner());
    let start = std::time::Instant::now();
    let outcome = catch_unwind(f);
    let elapsed = start.elapsed();
    drop(guard);
    match outcome {
        Ok(()) => println!("[acceptance] {id}: PASS ({elapsed:.2?})"),
        Err(cause) => {
            println!("[acceptance] {id}: FAIL ({elapsed:.2?})");
            resume_unwind(cause);
        }
    }
}

#[test]
fn criterion_1_mde_reference_table() {
    criterion("1 mde reference table", || {
        // (sigma %, delta %) reference pairs; table mode at n=10 must land
        // within 0.01 percentage points of each printed delta.
        let pairs = [
            (4.15, 9.28),
            (2.52, 5.63),
            (0.11, 0.24),
            (1.97, 4.41),
            (0.16, 0.35),
            (0.87, 1.94),
            (0.77, 1.73),
            (1.55, 3.47),
            (1.39, 3.11),
            (4.11, 9.20),
        ];
        let cfg = MdeConfig::default(); // n=10, table mode
        for (sigma_pct, delta_pct) in pairs {
            let delta = minimal_detectable_change(sigma_pct / 100.0, &cfg).unwrap() * 100.0;
            assert!(
                (delta - delta_pct).abs() <= 0.01 + 1e-12,
                "sigma {sigma_pct}%: got {delta:.4}%, expected {delta_pct}%"
            );
        }
    });
}

#[test]
fn criterion_2_quantile_accuracy() {
    criterion("2 quantile accuracy", || {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let q = normal_quantile(p).unwrap();
            let back = common::normal_cdf_oracle(q);
            assert!(
                (back - p).abs() <= 1e-6,
                "p={p}: |cdf(quantile) - p| = {:.3e}",
                (back - p).abs()
            );
        }
        let z995 = normal_quantile(0.995).unwrap();
        let z99 = normal_quantile(0.99).unwrap();
        assert!((z995 - 2.575829).abs() <= 1e-4, "z995 = {z995}");
        assert!((z99 - 2.326348).abs() <= 1e-4, "z99 = {z99}");
        assert!((common::normal_quantile_oracle(0.995) - z995).abs() <= 1e-5);
        assert!((common::normal_quantile_oracle(0.99) - z99).abs() <= 1e-5);
    });
}

#[test]
fn criterion_3_overhead_ordering() {
    criterion("3 overhead ordering", || {
        let dir = tempfile::tempdir().unwrap();
        let base = RunConfig {
            loop_starts: 5,
            calls_per_loop: 50_000,
            warmup_fraction: 0.5,
            workers: 1,
            workload: WorkloadConfig::new(10, 0, "m").unwrap(),
            output_dir: dir.path().to_path_buf(),
            keep_traces: false,
            ..RunConfig::default()
        };
        let baseline = runner::run_benchmark(&RunConfig {
            probe_kind: ProbeKind::Baseline,
            ..base.clone()
        })
        .unwrap();
        let writer = runner::run_benchmark(&RunConfig {
            probe_kind: ProbeKind::BinaryWriter,
            ..base
        })
        .unwrap();

        let s_base = baseline.run.summaries().unwrap();
        let s_writer = writer.run.summaries().unwrap();
        assert!(
            s_writer.per_call.mean_ns > s_base.per_call.mean_ns,
            "writer {:.2} ns/call not above baseline {:.2} ns/call",
            s_writer.per_call.mean_ns,
            s_base.per_call.mean_ns
        );
        let decision =
            detect_change(&s_base.loop_means_ns, &s_writer.loop_means_ns, 0.01).unwrap();
        assert!(
            decision.changed,
            "overhead not flagged: p = {:.3e}",
            decision.p_value
        );
    });
}

/// One delivery round: `producers` threads push `per_producer` records each
/// through a yield queue of `capacity` into a trace file, which must verify
/// complete and duplicate-free.
fn delivery_round(
    dir: &Path,
    producers: usize,
    capacity: usize,
    per_producer: usize,
    seed: u64,
) {
    let path = dir.join(format!("delivery-{producers}-{capacity}-{seed}.bin"));
    let mut registry = StringRegistry::new();
    let sig = registry.register_signature("m").unwrap();
    let queue =
        BoundedRecordQueue::new(capacity, PutStrategy::yielding(producers as u32).unwrap())
            .unwrap();
    let mut handles: Vec<_> = (0..producers)
        .map(|_| queue.register_producer().unwrap())
        .collect();
    let consumer = queue.attach_consumer().unwrap();
    let mut writer = TraceWriter::create(&path, &registry).unwrap();

    std::thread::scope(|s| {
        for (index, mut producer) in handles.drain(..).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64) << 32);
            s.spawn(move || {
                for i in 0..per_producer {
                    // randomized interleavings
                    if rng.gen_ratio(1, 64) {
                        std::thread::yield_now();
                    }
                    producer
                        .enqueue(&MonitoringRecord {
                            signature_id: sig,
                            trace_id: index as i64,
                            order_index: i as i32,
                            tin_ns: i as i64,
                            tout_ns: i as i64 + 1,
                        })
                        .unwrap();
                }
            });
        }
        s.spawn(move || consumer.drain_to(&mut writer).unwrap());
    });

    let report = verify_trace_file(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(
        report.records,
        (producers * per_producer) as u64,
        "{producers} producers, capacity {capacity}: lost records"
    );
    assert!(
        report.is_clean(),
        "{producers} producers, capacity {capacity}: {:?}",
        report.violations
    );
}

#[test]
fn criterion_4_exactly_once_delivery() {
    criterion("4 exactly-once delivery", || {
        let dir = tempfile::tempdir().unwrap();
        for rep in 0..20u64 {
            for producers in [1usize, 2, 4, 8, 12] {
                for capacity in [1usize, 16, 1024] {
                    delivery_round(dir.path(), producers, capacity, 10_000, rep);
                }
            }
        }
    });
}

#[test]
fn criterion_5_single_producer_hazard() {
    criterion("5 single-producer hazard", || {
        // The contract: two declared producers cannot construct an SP queue.
        assert!(PutStrategy::new(PutStrategyKind::SingleProducerBlocking, 2).is_err());

        // The override: misuse must be detectable after the fact.
        let dir = tempfile::tempdir().unwrap();
        let mut detected = 0u32;
        for trial in 0..50u64 {
            let path = dir.path().join(format!("hazard-{trial}.bin"));
            let mut registry = StringRegistry::new();
            let sig = registry.register_signature("m").unwrap();
            let strategy =
                PutStrategy::with_unsafe_mismatch(PutStrategyKind::SingleProducerBlocking, 2)
                    .unwrap();
            let queue = BoundedRecordQueue::new(16, strategy).unwrap();
            let mut producers: Vec<_> =
                (0..2).map(|_| queue.register_producer().unwrap()).collect();
            let consumer = queue.attach_consumer().unwrap();
            let mut writer = TraceWriter::create(&path, &registry).unwrap();

            std::thread::scope(|s| {
                for (index, mut producer) in producers.drain(..).enumerate() {
                    s.spawn(move || {
                        for i in 0..500 {
                            producer
                                .enqueue(&MonitoringRecord {
                                    signature_id: sig,
                                    trace_id: index as i64,
                                    order_index: i,
                                    tin_ns: i as i64,
                                    tout_ns: i as i64 + 1,
                                })
                                .unwrap();
                        }
                    });
                }
                s.spawn(move || consumer.drain_to(&mut writer).unwrap());
            });

            let report = verify_trace_file(&path).unwrap();
            if report.records < 1000 || !report.is_clean() {
                detected += 1;
            }
        }
        assert!(
            detected >= 1,
            "expected the misuse to be detected in at least 1 of 50 trials"
        );
        println!("[acceptance]   (hazard detected in {detected}/50 trials)");
    });
}

fn sample_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    // Box-Muller; one value per call is plenty here.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    mean + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn criterion_6_change_detection_power() {
    criterion("6 change-detection power", || {
        let mean = 100.0;
        let sigma_rel = 0.02;
        let sd = mean * sigma_rel;
        let delta = minimal_detectable_change(sigma_rel, &MdeConfig::default()).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e_7bec);
        let mut run_trials = |shift_fraction: f64| -> u32 {
            let shifted_mean = mean * (1.0 + shift_fraction);
            let mut detections = 0u32;
            for _ in 0..1000 {
                let a: Vec<f64> = (0..10).map(|_| sample_normal(&mut rng, mean, sd)).collect();
                let b: Vec<f64> = (0..10)
                    .map(|_| sample_normal(&mut rng, shifted_mean, sd))
                    .collect();
                if detect_change(&a, &b, 0.01).unwrap().changed {
                    detections += 1;
                }
            }
            detections
        };

        let big = run_trials(3.0 * delta);
        assert!(big >= 990, "3-delta shift detected only {big}/1000 times");
        let small = run_trials(0.1 * delta);
        assert!(small <= 50, "0.1-delta shift detected {small}/1000 times");
        println!("[acceptance]   (power {big}/1000 at 3 delta, {small}/1000 at 0.1 delta)");
    });
}

#[test]
fn criterion_7_thread_sweep_export() {
    criterion("7 thread-sweep export", || {
        let dir = tempfile::tempdir().unwrap();
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_overbench"))
            .current_dir(dir.path())
            .args([
                "--json",
                "sweep",
                "--workers-list",
                "1,2,4",
                "--loops",
                "2",
                "--calls",
                "500",
                "--depth",
                "5",
                "--out",
                "out",
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "sweep failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let csv_path = dir.path().join(v["csv_path"].as_str().unwrap());
        let csv = std::fs::read_to_string(csv_path).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("workers,probe,mean_ns,stddev_ns,rel_stddev"),
            "CSV header contract broken"
        );
        let rows: Vec<&str> = lines.collect();
        for probe in ["baseline", "binary-writer"] {
            let per_kind = rows
                .iter()
                .filter(|r| r.split(',').nth(1) == Some(probe))
                .count();
            assert_eq!(per_kind, 3, "{probe}: expected 3 rows, got {per_kind}");
        }

        // Duration accounting: every persisted run holds n loops of
        // calls x workers samples.
        let mut raw_runs = 0;
        for entry in std::fs::read_dir(dir.path().join("out")).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "json")
                && path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run-"))
            {
                raw_runs += 1;
                let run = load_raw_run(&path).unwrap();
                assert_eq!(run.loop_results.len(), 2);
                for l in &run.loop_results {
                    assert_eq!(l.durations_ns.len(), 500 * run.config.workers);
                }
            }
        }
        assert_eq!(raw_runs, 6, "expected 6 persisted runs (3 counts x 2 probes)");
    });
}

fn synthetic_history_benchmark(name: &str, value: f64, loop_means: &[f64]) -> GabBenchmark {
    let mean = loop_means.iter().sum::<f64>() / loop_means.len() as f64;
    let var = loop_means
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (loop_means.len() - 1) as f64;
    let sigma_rel = var.sqrt() / mean;
    GabBenchmark {
        name: name.into(),
        unit: "ns/call".into(),
        value,
        range: format!("±{:.2}%", sigma_rel * 100.0),
        extra: serde_json::to_string(&history::ExtraData {
            config_digest: "d".into(),
            loop_means_ns: loop_means.to_vec(),
            sigma_rel,
            delta_rel: (loop_means.len() as f64 / 2.0).sqrt() * sigma_rel,
        })
        .unwrap(),
    }
}

#[test]
fn criterion_8_history_integrity() {
    criterion("8 history integrity", || {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        let env = runner::capture_environment();

        for i in 0..100i64 {
            let entry = HistoryEntry {
                commit_id: format!("commit-{i:03}"),
                timestamp: chrono::DateTime::from_timestamp(1_700_000_000 + i, 0).unwrap(),
                environment: env.clone(),
                benchmarks: vec![synthetic_history_benchmark(
                    "Baseline",
                    100.0 + i as f64,
                    &[99.0 + i as f64, 101.0 + i as f64],
                )],
            };
            history::append_entry(&path, entry).unwrap();
        }
        let loaded = history::load_history(&path).unwrap();
        assert_eq!(loaded.schema_version, HISTORY_SCHEMA_VERSION);
        assert_eq!(loaded.entries.len(), 100);
        for (i, entry) in loaded.entries.iter().enumerate() {
            assert_eq!(entry.commit_id, format!("commit-{i:03}"));
            let b = &entry.benchmarks[0];
            assert_eq!(b.value, 100.0 + i as f64);
            assert!(history::parse_range(&b.range).is_some());
            let extra: history::ExtraData = serde_json::from_str(&b.extra).unwrap();
            assert_eq!(extra.loop_means_ns.len(), 2);
        }

        // Exported documents carry exactly the documented key set.
        let exported = serde_json::to_value(&loaded.entries[0].benchmarks).unwrap();
        let obj = exported[0].as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, vec!["extra", "name", "range", "unit", "value"]);

        // Ratio 2.0: a 2.5x jump fires, a 1.5x jump does not.
        let mut jumped = HistoryFile::default();
        for (ts, value) in [(1, 100.0), (2, 250.0)] {
            jumped.entries.push(HistoryEntry {
                commit_id: format!("c{ts}"),
                timestamp: chrono::DateTime::from_timestamp(ts, 0).unwrap(),
                environment: env.clone(),
                benchmarks: vec![synthetic_history_benchmark("B", value, &[value, value + 1.0])],
            });
        }
        let report = check_regression(&jumped, RegressionPolicy::Ratio(2.0)).unwrap();
        assert_eq!(report.alerts.len(), 1, "2.5x jump must alert");

        jumped.entries[1].benchmarks =
            vec![synthetic_history_benchmark("B", 150.0, &[150.0, 151.0])];
        let report = check_regression(&jumped, RegressionPolicy::Ratio(2.0)).unwrap();
        assert!(report.alerts.is_empty(), "1.5x jump must not alert");
    });
}

#[test]
fn criterion_9_warmup_removal() {
    criterion("9 warmup removal", || {
        // First half elevated 2x, second half the real steady state.
        let mut series = Vec::with_capacity(10_000);
        for i in 0..5_000u64 {
            series.push((200 + (i % 7)) as f64);
        }
        let mut steady = Vec::with_capacity(5_000);
        for i in 0..5_000u64 {
            let v = (100 + (i % 5)) as f64;
            series.push(v);
            steady.push(v);
        }
        let true_mean = steady.iter().sum::<f64>() / steady.len() as f64;
        let summary = summarize(&series, 0.5, SampleBasis::PerCall).unwrap();
        let rel_err = (summary.mean_ns - true_mean).abs() / true_mean;
        assert!(
            rel_err <= 0.001,
            "steady-state mean off by {:.4}% (got {:.4}, want {:.4})",
            rel_err * 100.0,
            summary.mean_ns,
            true_mean
        );
    });
}
