//! Append-only benchmark history, the CI-compatible JSON export, and
//! regression checks against prior entries.
//!
//! The export array matches the `customSmallerIsBetter` input of the common
//! benchmark-action tooling: objects with `name`, `unit`, `value`, `range`,
//! and `extra` keys. Per-loop means ride along inside `extra` so the
//! statistical regression check works without raw-duration archives.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::BenchmarkRun;
use crate::stats::{self, MdeConfig};

pub const HISTORY_SCHEMA_VERSION: u32 = 1;

/// Default ratio threshold used when statistical data is unavailable.
pub const DEFAULT_RATIO_THRESHOLD: f64 = 2.0;

/// One exported benchmark series point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GabBenchmark {
    pub name: String,
    pub unit: String,
    pub value: f64,
    /// Formatted as `±<sigma>%`.
    pub range: String,
    /// Compact JSON ([`ExtraData`]) with the config digest and loop means.
    pub extra: String,
}

/// Machine-readable payload carried in a benchmark's `extra` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraData {
    pub config_digest: String,
    pub loop_means_ns: Vec<f64>,
    /// Relative standard deviation across loop means (fraction).
    pub sigma_rel: f64,
    /// Minimal detectable relative change at the default budgets (fraction).
    pub delta_rel: f64,
}

/// One persisted run in the history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub commit_id: String,
    pub timestamp: DateTime<Utc>,
    pub environment: crate::runner::EnvironmentDescriptor,
    pub benchmarks: Vec<GabBenchmark>,
}

/// The whole history file. Entries are append-only with non-decreasing
/// timestamps; the file is replaced atomically on every append.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryFile {
    pub schema_version: u32,
    pub entries: Vec<HistoryEntry>,
}

impl Default for HistoryFile {
    fn default() -> Self {
        HistoryFile {
            schema_version: HISTORY_SCHEMA_VERSION,
            entries: Vec::new(),
        }
    }
}

/// Parses a `±4.41%` range string back to a fraction.
pub fn parse_range(range: &str) -> Option<f64> {
    let inner = range.strip_prefix('±')?.strip_suffix('%')?;
    let pct: f64 = inner.parse().ok()?;
    if pct >= 0.0 {
        Some(pct / 100.0)
    } else {
        None
    }
}

fn benchmark_name(run: &BenchmarkRun) -> String {
    let label = run.config.probe_kind.label();
    if run.config.workers > 1 {
        format!("{label} ({} workers)", run.config.workers)
    } else {
        label.to_string()
    }
}

fn benchmark_from_run(run: &BenchmarkRun) -> Result<GabBenchmark> {
    let summaries = run.summaries()?;
    let mde = MdeConfig {
        n: run.config.loop_starts,
        ..MdeConfig::default()
    };
    let sigma_rel = summaries.per_loop.rel_stddev;
    let extra = ExtraData {
        config_digest: run.config.comparability_digest(),
        loop_means_ns: summaries.loop_means_ns.clone(),
        sigma_rel,
        delta_rel: stats::minimal_detectable_change(sigma_rel, &mde)?,
    };
    let value = summaries.per_call.mean_ns;
    if value.is_nan() || value <= 0.0 {
        return Err(Error::Integrity(format!(
            "benchmark value must be positive, got {value}"
        )));
    }
    Ok(GabBenchmark {
        name: benchmark_name(run),
        unit: "ns/call".into(),
        value,
        range: format!("±{:.2}%", sigma_rel * 100.0),
        extra: serde_json::to_string(&extra)?,
    })
}

fn benchmarks_from_runs(runs: &[&BenchmarkRun]) -> Result<Vec<GabBenchmark>> {
    let mut benchmarks = Vec::with_capacity(runs.len());
    for run in runs {
        benchmarks.push(benchmark_from_run(run)?);
    }
    for (i, b) in benchmarks.iter().enumerate() {
        if benchmarks[..i].iter().any(|prev| prev.name == b.name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate benchmark name '{}' in one export",
                b.name
            )));
        }
    }
    Ok(benchmarks)
}

/// Emits the CI-compatible JSON array (smaller-is-better semantics), one
/// object per run. Names must come out unique.
pub fn export_gab_json(runs: &[&BenchmarkRun]) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(benchmarks_from_runs(runs)?)?)
}

/// Parses an exported JSON array back into benchmark records.
pub fn parse_gab_json(json: &str) -> Result<Vec<GabBenchmark>> {
    Ok(serde_json::from_str(json)?)
}

/// Builds one history entry from runs measured in the same environment.
pub fn entry_from_runs(runs: &[&BenchmarkRun], commit_id: &str) -> Result<HistoryEntry> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidConfig("history entry needs at least one run".into()))?;
    let digest = first.environment.digest();
    if runs.iter().any(|r| r.environment.digest() != digest) {
        return Err(Error::Comparability(
            "runs in one history entry must share an environment".into(),
        ));
    }
    let benchmarks = benchmarks_from_runs(runs)?;
    let timestamp = runs.iter().map(|r| r.started_at).max().unwrap_or_else(Utc::now);
    Ok(HistoryEntry {
        commit_id: commit_id.to_string(),
        timestamp,
        environment: first.environment.clone(),
        benchmarks,
    })
}

/// Advisory single-writer lock (`<path>.lock`), released on drop.
struct HistoryLock {
    lock_path: PathBuf,
}

impl HistoryLock {
    fn acquire(history_path: &Path) -> Result<Self> {
        let lock_path = history_path.with_extension("json.lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&lock_path)
        {
            Ok(_) => Ok(HistoryLock { lock_path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::LockBusy(lock_path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for HistoryLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock_path);
    }
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema_version: u32,
}

/// Reads a history file; a missing file is an empty history. The schema
/// version is checked before the entries are parsed.
pub fn load_history(path: &Path) -> Result<HistoryFile> {
    match std::fs::read(path) {
        Ok(bytes) => {
            let probe: SchemaProbe = serde_json::from_slice(&bytes)?;
            if probe.schema_version != HISTORY_SCHEMA_VERSION {
                return Err(Error::SchemaMismatch {
                    found: probe.schema_version,
                    expected: HISTORY_SCHEMA_VERSION,
                });
            }
            Ok(serde_json::from_slice(&bytes)?)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(HistoryFile::default()),
        Err(e) => Err(e.into()),
    }
}

fn validate_entry(entry: &HistoryEntry, previous: Option<&HistoryEntry>) -> Result<()> {
    for (i, b) in entry.benchmarks.iter().enumerate() {
        if entry.benchmarks[..i].iter().any(|prev| prev.name == b.name) {
            return Err(Error::InvalidConfig(format!(
                "duplicate benchmark name '{}' within one entry",
                b.name
            )));
        }
        if b.value.is_nan() || b.value <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "benchmark '{}' has non-positive value {}",
                b.name, b.value
            )));
        }
        if parse_range(&b.range).is_none() {
            return Err(Error::InvalidConfig(format!(
                "benchmark '{}' has malformed range '{}'",
                b.name, b.range
            )));
        }
    }
    if let Some(prev) = previous {
        if entry.timestamp < prev.timestamp {
            return Err(Error::InvalidConfig(
                "history timestamps must be non-decreasing".into(),
            ));
        }
    }
    Ok(())
}

/// Appends one entry: read, validate, extend, atomic-rename replace. Prior
/// entries are never rewritten. A concurrent writer yields a retryable
/// lock-busy error.
pub fn append_entry(path: &Path, entry: HistoryEntry) -> Result<HistoryFile> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let _lock = HistoryLock::acquire(path)?;
    let mut file = load_history(path)?;
    validate_entry(&entry, file.entries.last())?;
    file.entries.push(entry);

    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    let mut writer = std::io::BufWriter::new(tmp.as_file_mut());
    serde_json::to_writer_pretty(&mut writer, &file)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    drop(writer);
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(file)
}

/// Builds an entry from a single run and appends it.
pub fn append_run(path: &Path, run: &BenchmarkRun, commit_id: &str) -> Result<HistoryFile> {
    append_entry(path, entry_from_runs(&[run], commit_id)?)
}

/// Alert policy for `check_regression`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressionPolicy {
    /// Alert when latest/previous exceeds the threshold.
    Ratio(f64),
    /// Welch test on stored loop means at this alpha; also reports whether
    /// the observed change exceeds the stored minimal detectable change.
    Statistical(f64),
}

/// One flagged regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Alert {
    pub benchmark: String,
    pub environment_digest: String,
    pub previous_value: f64,
    pub latest_value: f64,
    pub ratio: f64,
    pub observed_rel_change: Option<f64>,
    pub p_value: Option<f64>,
    /// Whether the observed change exceeds the previous entry's stored
    /// minimal detectable change. Statistical mode only.
    pub exceeds_mde: Option<bool>,
    /// True when statistical mode fell back to the ratio rule.
    pub policy_downgraded: bool,
    pub message: String,
}

/// Regression check output: alerts plus non-fatal warnings (e.g. statistical
/// mode downgrades).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RegressionReport {
    pub alerts: Vec<Alert>,
    pub warnings: Vec<String>,
}

fn extra_data(b: &GabBenchmark) -> Option<ExtraData> {
    serde_json::from_str(&b.extra).ok()
}

/// Compares the two most recent points of every benchmark series. Series are
/// partitioned by environment digest: entries from different environments
/// are never compared with each other.
pub fn check_regression(history: &HistoryFile, policy: RegressionPolicy) -> Result<RegressionReport> {
    if let RegressionPolicy::Statistical(alpha) = policy {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
    }
    let mut report = RegressionReport::default();

    // (environment digest, benchmark name) -> chronological points
    let mut series: Vec<((String, String), Vec<&GabBenchmark>)> = Vec::new();
    for entry in &history.entries {
        let digest = entry.environment.digest();
        for b in &entry.benchmarks {
            let key = (digest.clone(), b.name.clone());
            match series.iter_mut().find(|(k, _)| *k == key) {
                Some((_, points)) => points.push(b),
                None => series.push((key, vec![b])),
            }
        }
    }

    for ((digest, name), points) in series {
        if points.len() < 2 {
            continue;
        }
        let previous = points[points.len() - 2];
        let latest = points[points.len() - 1];
        let ratio = latest.value / previous.value;

        match policy {
            RegressionPolicy::Ratio(threshold) => {
                if ratio > threshold {
                    report.alerts.push(Alert {
                        benchmark: name.clone(),
                        environment_digest: digest,
                        previous_value: previous.value,
                        latest_value: latest.value,
                        ratio,
                        observed_rel_change: None,
                        p_value: None,
                        exceeds_mde: None,
                        policy_downgraded: false,
                        message: format!(
                            "{name}: {:.2} -> {:.2} ns/call ({ratio:.2}x > {threshold:.2}x)",
                            previous.value, latest.value
                        ),
                    });
                }
            }
            RegressionPolicy::Statistical(alpha) => {
                let data = extra_data(previous).zip(extra_data(latest)).filter(
                    |(a, b)| a.loop_means_ns.len() >= 2 && b.loop_means_ns.len() >= 2,
                );
                match data {
                    Some((prev_extra, latest_extra)) => {
                        let decision = stats::detect_change(
                            &prev_extra.loop_means_ns,
                            &latest_extra.loop_means_ns,
                            alpha,
                        )?;
                        if decision.changed && decision.relative_change > 0.0 {
                            let exceeds = decision.relative_change.abs() > prev_extra.delta_rel;
                            report.alerts.push(Alert {
                                benchmark: name.clone(),
                                environment_digest: digest,
                                previous_value: previous.value,
                                latest_value: latest.value,
                                ratio,
                                observed_rel_change: Some(decision.relative_change),
                                p_value: Some(decision.p_value),
                                exceeds_mde: Some(exceeds),
                                policy_downgraded: false,
                                message: format!(
                                    "{name}: +{:.2}% (p = {:.2e}, mde {}exceeded)",
                                    decision.relative_change * 100.0,
                                    decision.p_value,
                                    if exceeds { "" } else { "not " }
                                ),
                            });
                        }
                    }
                    None => {
                        report.warnings.push(format!(
                            "{name}: missing per-loop data; downgraded to ratio {DEFAULT_RATIO_THRESHOLD}x"
                        ));
                        if ratio > DEFAULT_RATIO_THRESHOLD {
                            report.alerts.push(Alert {
                                benchmark: name.clone(),
                                environment_digest: digest,
                                previous_value: previous.value,
                                latest_value: latest.value,
                                ratio,
                                observed_rel_change: None,
                                p_value: None,
                                exceeds_mde: None,
                                policy_downgraded: true,
                                message: format!(
                                    "{name}: {:.2} -> {:.2} ns/call ({ratio:.2}x, ratio fallback)",
                                    previous.value, latest.value
                                ),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runner::EnvironmentDescriptor;

    fn test_env(tag: &str) -> EnvironmentDescriptor {
        EnvironmentDescriptor {
            hostname: format!("host-{tag}"),
            os_name: "linux".into(),
            os_version: "1".into(),
            cpu_model: "test cpu".into(),
            logical_cpus: 4,
            memory_bound_bytes: 1 << 30,
            clock_resolution_ns: 20,
        }
    }

    fn synthetic_benchmark(name: &str, value: f64, loop_means: &[f64]) -> GabBenchmark {
        let means: Vec<f64> = loop_means.to_vec();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let var =
            means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (means.len() - 1) as f64;
        let sigma_rel = var.sqrt() / mean;
        let extra = ExtraData {
            config_digest: "digest".into(),
            loop_means_ns: means,
            sigma_rel,
            delta_rel: (loop_means.len() as f64 / 2.0).sqrt() * sigma_rel,
        };
        GabBenchmark {
            name: name.into(),
            unit: "ns/call".into(),
            value,
            range: format!("±{:.2}%", sigma_rel * 100.0),
            extra: serde_json::to_string(&extra).unwrap(),
        }
    }

    fn entry_at(ts_secs: i64, env_tag: &str, benchmarks: Vec<GabBenchmark>) -> HistoryEntry {
        HistoryEntry {
            commit_id: format!("commit-{ts_secs}"),
            timestamp: DateTime::from_timestamp(ts_secs, 0).unwrap(),
            environment: test_env(env_tag),
            benchmarks,
        }
    }

    #[test]
    fn append_to_empty_then_parse_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        let entry = entry_at(100, "a", vec![synthetic_benchmark("Baseline", 90.0, &[89.0, 91.0])]);
        let file = append_entry(&path, entry.clone()).unwrap();
        assert_eq!(file.entries.len(), 1);
        let loaded = load_history(&path).unwrap();
        assert_eq!(loaded.entries, vec![entry]);
    }

    #[test]
    fn appends_preserve_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        for ts in [100, 200, 300] {
            let entry = entry_at(ts, "a", vec![synthetic_benchmark("Baseline", ts as f64, &[1.0, 2.0])]);
            append_entry(&path, entry).unwrap();
        }
        let loaded = load_history(&path).unwrap();
        let commits: Vec<&str> = loaded.entries.iter().map(|e| e.commit_id.as_str()).collect();
        assert_eq!(commits, vec!["commit-100", "commit-200", "commit-300"]);
    }

    #[test]
    fn out_of_order_timestamp_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        append_entry(&path, entry_at(200, "a", vec![synthetic_benchmark("B", 1.0, &[1.0, 2.0])]))
            .unwrap();
        let err = append_entry(&path, entry_at(100, "a", vec![synthetic_benchmark("B", 1.0, &[1.0, 2.0])]));
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn lock_conflict_is_retryable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        let _held = HistoryLock::acquire(&path).unwrap();
        let err = append_entry(&path, entry_at(1, "a", vec![]));
        assert!(matches!(err, Err(Error::LockBusy(_))));
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        std::fs::write(&path, r#"{"schema_version": 99, "entries": []}"#).unwrap();
        assert!(matches!(
            load_history(&path),
            Err(Error::SchemaMismatch { found: 99, expected: 1 })
        ));
    }

    #[test]
    fn ratio_policy_alerts_on_jump() {
        let mut history = HistoryFile::default();
        history.entries.push(entry_at(1, "a", vec![synthetic_benchmark("B", 100.0, &[99.0, 101.0])]));
        history.entries.push(entry_at(2, "a", vec![synthetic_benchmark("B", 250.0, &[249.0, 251.0])]));
        let report = check_regression(&history, RegressionPolicy::Ratio(2.0)).unwrap();
        assert_eq!(report.alerts.len(), 1);
        assert!((report.alerts[0].ratio - 2.5).abs() < 1e-9);
    }

    #[test]
    fn ratio_policy_stays_quiet_below_threshold() {
        let mut history = HistoryFile::default();
        history.entries.push(entry_at(1, "a", vec![synthetic_benchmark("B", 100.0, &[99.0, 101.0])]));
        history.entries.push(entry_at(2, "a", vec![synthetic_benchmark("B", 150.0, &[149.0, 151.0])]));
        let report = check_regression(&history, RegressionPolicy::Ratio(2.0)).unwrap();
        assert!(report.alerts.is_empty());
    }

    #[test]
    fn different_environments_are_never_compared() {
        let mut history = HistoryFile::default();
        history.entries.push(entry_at(1, "a", vec![synthetic_benchmark("B", 100.0, &[99.0, 101.0])]));
        // 10x jump, but on a different machine: no alert.
        history.entries.push(entry_at(2, "b", vec![synthetic_benchmark("B", 1000.0, &[999.0, 1001.0])]));
        let report = check_regression(&history, RegressionPolicy::Ratio(2.0)).unwrap();
        assert!(report.alerts.is_empty());
    }

    #[test]
    fn statistical_mode_alerts_on_injected_shift() {
        // Previous entry: tight loop means around 100. Latest: shifted by
        // three times the stored minimal detectable change.
        let base_means = [99.0, 100.5, 100.0, 99.5, 101.0, 100.2, 99.8, 100.6, 99.4, 100.0];
        let prev = synthetic_benchmark("B", 100.0, &base_means);
        let prev_extra: ExtraData = serde_json::from_str(&prev.extra).unwrap();
        let shift = 1.0 + 3.0 * prev_extra.delta_rel;
        let shifted: Vec<f64> = base_means.iter().map(|m| m * shift).collect();
        let latest = synthetic_benchmark("B", 100.0 * shift, &shifted);

        let mut history = HistoryFile::default();
        history.entries.push(entry_at(1, "a", vec![prev]));
        history.entries.push(entry_at(2, "a", vec![latest]));
        let report = check_regression(&history, RegressionPolicy::Statistical(0.01)).unwrap();
        assert_eq!(report.alerts.len(), 1);
        let alert = &report.alerts[0];
        assert!(!alert.policy_downgraded);
        assert!(alert.p_value.unwrap() < 0.01);
        assert_eq!(alert.exceeds_mde, Some(true));

        // and stays quiet when nothing changed
        let mut quiet = HistoryFile::default();
        let same = synthetic_benchmark("B", 100.0, &base_means);
        quiet.entries.push(entry_at(1, "a", vec![same.clone()]));
        quiet.entries.push(entry_at(2, "a", vec![same]));
        let report = check_regression(&quiet, RegressionPolicy::Statistical(0.01)).unwrap();
        assert!(report.alerts.is_empty());
    }

    #[test]
    fn statistical_mode_downgrades_without_loop_means() {
        let mut b_old = synthetic_benchmark("B", 100.0, &[99.0, 101.0]);
        b_old.extra = "not json".into();
        let b_new = synthetic_benchmark("B", 250.0, &[249.0, 251.0]);
        let mut history = HistoryFile::default();
        history.entries.push(entry_at(1, "a", vec![b_old]));
        history.entries.push(entry_at(2, "a", vec![b_new]));
        let report = check_regression(&history, RegressionPolicy::Statistical(0.01)).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.alerts.len(), 1);
        assert!(report.alerts[0].policy_downgraded);
    }

    #[test]
    fn range_strings_parse_back() {
        assert_eq!(parse_range("±4.41%"), Some(0.0441));
        assert_eq!(parse_range("±0.00%"), Some(0.0));
        assert_eq!(parse_range("4.41%"), None);
        assert_eq!(parse_range("±-1%"), None);
    }

    #[test]
    fn gab_json_round_trips() {
        let b = synthetic_benchmark("Baseline", 90.68, &[90.0, 91.0]);
        let json = serde_json::to_string(&vec![b.clone()]).unwrap();
        let parsed = parse_gab_json(&json).unwrap();
        assert_eq!(parsed, vec![b]);
    }
}
