//! Benchmark execution: n loop starts per configuration, fresh probe state
//! per loop, sequential and multi-worker modes, environment capture, and the
//! raw-run file the analysis commands consume.

mod environment;

pub use environment::{capture_environment, EnvironmentDescriptor};

use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicU64;
use std::sync::Arc;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::probe::{
    verify_trace_file, BaselineProbe, BinaryWriterProbe, BoundedRecordQueue, DrainReport,
    ProbeHandle, ProbeKind, PutStrategy, PutStrategyKind, StringRegistry, TraceWriter,
};
use crate::stats::{self, RunSummaries};
use crate::workload::{execute_monitored_call, WorkloadConfig};

pub const RAW_RUN_SCHEMA_VERSION: u32 = 1;

/// Full configuration of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of independent loop starts (n). At least 2, so variance across
    /// loop starts is computable.
    pub loop_starts: usize,
    /// Monitored calls per worker per loop start.
    pub calls_per_loop: usize,
    /// Fraction of each loop's leading samples discarded before statistics.
    pub warmup_fraction: f64,
    pub workers: usize,
    pub probe_kind: ProbeKind,
    pub workload: WorkloadConfig,
    pub queue_capacity: usize,
    pub put_strategy_kind: PutStrategyKind,
    /// Opt-in override reproducing the single-producer misuse failure.
    pub unsafe_allow_mismatch: bool,
    pub output_dir: PathBuf,
    /// Keep per-loop trace files after successful verification.
    pub keep_traces: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            loop_starts: 10,
            calls_per_loop: 100_000,
            warmup_fraction: 0.5,
            workers: 1,
            probe_kind: ProbeKind::BinaryWriter,
            workload: WorkloadConfig::default(),
            queue_capacity: 10_000,
            put_strategy_kind: PutStrategyKind::Yield,
            unsafe_allow_mismatch: false,
            output_dir: PathBuf::from("overbench-out"),
            keep_traces: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loop_starts < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 loop starts for variance, got {}",
                self.loop_starts
            )));
        }
        if self.calls_per_loop == 0 {
            return Err(Error::InvalidConfig("calls_per_loop must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidConfig(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidConfig("queue capacity must be >= 1".into()));
        }
        if self.workers >= 2
            && self.put_strategy_kind == PutStrategyKind::SingleProducerBlocking
            && !self.unsafe_allow_mismatch
        {
            return Err(Error::InvalidConfig(
                "SingleProducerBlocking requires a single worker; \
                 use the yield strategy for parallel runs"
                    .into(),
            ));
        }
        // Re-validate the workload in case the config was deserialized.
        WorkloadConfig::new(
            self.workload.recursion_depth(),
            self.workload.spin_ns(),
            self.workload.signature(),
        )?;
        Ok(())
    }

    /// The put strategy declared for this run's worker count.
    pub fn put_strategy(&self) -> Result<PutStrategy> {
        if self.unsafe_allow_mismatch {
            PutStrategy::with_unsafe_mismatch(self.put_strategy_kind, self.workers as u32)
        } else {
            PutStrategy::new(self.put_strategy_kind, self.workers as u32)
        }
    }

    /// Digest of everything that must match for two runs to be comparable.
    /// Output location and trace retention are excluded.
    pub fn comparability_digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.probe_kind.flag_name().as_bytes());
        hasher.update(self.workload.signature().as_bytes());
        hasher.update(self.workload.recursion_depth().to_le_bytes());
        hasher.update(self.workload.spin_ns().to_le_bytes());
        hasher.update((self.calls_per_loop as u64).to_le_bytes());
        hasher.update((self.workers as u64).to_le_bytes());
        hasher.update((self.loop_starts as u64).to_le_bytes());
        hasher.update((self.queue_capacity as u64).to_le_bytes());
        hasher.update(self.put_strategy_kind.to_string().as_bytes());
        hasher.update(self.warmup_fraction.to_le_bytes());
        let hex = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        hex[..16].to_string()
    }

    /// Expected record count per loop start for record-emitting probes.
    pub fn expected_records_per_loop(&self) -> u64 {
        self.workers as u64 * self.calls_per_loop as u64 * u64::from(self.workload.recursion_depth())
    }
}

/// Per-call durations of one fresh harness start.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopStartResult {
    pub loop_index: usize,
    /// calls_per_loop * workers durations, interleaved by call index so the
    /// leading fraction is every worker's warmup.
    pub durations_ns: Vec<u64>,
    pub drain: Option<DrainReport>,
    pub checksum_fold: u64,
}

/// One benchmark run: n loop starts under a single configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub config: RunConfig,
    pub environment: EnvironmentDescriptor,
    pub started_at: DateTime<Utc>,
    pub loop_results: Vec<LoopStartResult>,
    /// Fold of all call checksums; printed so the calls cannot be elided.
    pub checksum_fold: u64,
}

impl BenchmarkRun {
    /// Summary statistics on both bases (pooled per-call and per-loop means).
    pub fn summaries(&self) -> Result<RunSummaries> {
        let loops: Vec<Vec<u64>> = self
            .loop_results
            .iter()
            .map(|l| l.durations_ns.clone())
            .collect();
        stats::summarize_loops(&loops, self.config.warmup_fraction)
    }
}

/// A finished run plus where its artifacts went.
#[derive(Debug)]
pub struct CompletedRun {
    pub run: BenchmarkRun,
    pub raw_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

/// Interleaves per-worker duration series by call index, so that the pooled
/// series is roughly time-ordered and warmup stripping removes every
/// worker's early calls.
fn pool_interleaved(per_worker: Vec<Vec<u64>>) -> Vec<u64> {
    let calls = per_worker.first().map_or(0, Vec::len);
    let mut pooled = Vec::with_capacity(calls * per_worker.len());
    for call in 0..calls {
        for series in &per_worker {
            pooled.push(series[call]);
        }
    }
    pooled
}

struct WorkerOutput {
    durations: Vec<u64>,
    checksum_fold: u64,
    records_emitted: u64,
}

fn worker_loop(workload: &WorkloadConfig, calls: usize, mut probe: ProbeHandle) -> Result<WorkerOutput> {
    let mut durations = Vec::with_capacity(calls);
    let mut fold = 0u64;
    for _ in 0..calls {
        let out = execute_monitored_call(workload, &mut probe);
        durations.push(out.duration_ns);
        fold = fold.wrapping_add(out.checksum);
    }
    let records_emitted = probe.finish()?;
    Ok(WorkerOutput {
        durations,
        checksum_fold: fold,
        records_emitted,
    })
}

/// Executes one loop start with completely fresh probe state: new queue, new
/// trace file, zeroed counters. For the binary writer, the trace file is
/// verified before the result is accepted.
pub fn run_single_loop(cfg: &RunConfig, loop_index: usize, trace_dir: &Path) -> Result<LoopStartResult> {
    match cfg.probe_kind {
        ProbeKind::Baseline => run_baseline_loop(cfg, loop_index),
        ProbeKind::BinaryWriter => run_writer_loop(cfg, loop_index, trace_dir),
    }
}

fn join_worker(
    handle: std::thread::ScopedJoinHandle<'_, Result<WorkerOutput>>,
) -> Result<WorkerOutput> {
    handle
        .join()
        .map_err(|_| Error::Integrity("a worker thread panicked; run aborted".into()))?
}

fn run_baseline_loop(cfg: &RunConfig, loop_index: usize) -> Result<LoopStartResult> {
    let outputs = std::thread::scope(|s| -> Result<Vec<WorkerOutput>> {
        let handles: Vec<_> = (0..cfg.workers)
            .map(|_| {
                s.spawn(|| {
                    worker_loop(
                        &cfg.workload,
                        cfg.calls_per_loop,
                        ProbeHandle::Baseline(BaselineProbe::new()),
                    )
                })
            })
            .collect();
        handles.into_iter().map(join_worker).collect()
    })?;

    Ok(assemble_loop_result(loop_index, outputs, None))
}

fn run_writer_loop(cfg: &RunConfig, loop_index: usize, trace_dir: &Path) -> Result<LoopStartResult> {
    let mut registry = StringRegistry::new();
    let signature_id = registry.register_signature(cfg.workload.signature())?;
    let strategy = cfg.put_strategy()?;
    let queue = BoundedRecordQueue::new(cfg.queue_capacity, strategy)?;
    debug_assert_eq!(queue.counters().enqueued, 0, "loop start must begin fresh");

    std::fs::create_dir_all(trace_dir)?;
    let trace_path = trace_dir.join(format!("trace-loop-{loop_index}.bin"));
    let mut writer = TraceWriter::create(&trace_path, &registry)?;

    // All producers are registered before the consumer starts, so the
    // shutdown barrier (every declared producer completed) is always reached
    // even when this function bails out early.
    let mut producers = Vec::with_capacity(cfg.workers);
    for _ in 0..cfg.workers {
        producers.push(queue.register_producer()?);
    }
    let consumer = queue.attach_consumer()?;
    let trace_ids = Arc::new(AtomicU64::new(0));
    let clock_origin = Instant::now();

    let (outputs, drain) = std::thread::scope(|s| -> Result<(Vec<WorkerOutput>, DrainReport)> {
        let drain_handle = s.spawn(move || consumer.drain_to(&mut writer));
        let worker_handles: Vec<_> = producers
            .drain(..)
            .map(|producer| {
                let probe = ProbeHandle::Writer(BinaryWriterProbe::new(
                    producer,
                    signature_id,
                    Arc::clone(&trace_ids),
                    clock_origin,
                ));
                s.spawn(move || worker_loop(&cfg.workload, cfg.calls_per_loop, probe))
            })
            .collect();

        let mut outputs = Vec::with_capacity(cfg.workers);
        let mut first_error = None;
        for handle in worker_handles {
            match join_worker(handle) {
                Ok(out) => outputs.push(out),
                Err(e) => first_error = first_error.or(Some(e)),
            }
        }
        let drain = drain_handle
            .join()
            .map_err(|_| Error::Integrity("consumer thread panicked; run aborted".into()))?;
        if let Some(e) = first_error {
            return Err(e);
        }
        Ok((outputs, drain?))
    })?;

    let expected = cfg.expected_records_per_loop();
    let emitted: u64 = outputs.iter().map(|o| o.records_emitted).sum();
    if emitted != expected {
        return Err(Error::Integrity(format!(
            "workers emitted {emitted} records, expected {expected}"
        )));
    }

    let verification = verify_trace_file(&trace_path)?;
    if !verification.is_clean() || verification.records != expected {
        return Err(Error::Integrity(format!(
            "trace verification failed for loop {loop_index}: {} records (expected {expected}), \
             {} violations, {} unknown signatures",
            verification.records,
            verification.violations.len(),
            verification.unknown_signature_ids.len()
        )));
    }

    if !cfg.keep_traces {
        std::fs::remove_file(&trace_path)?;
    }

    Ok(assemble_loop_result(loop_index, outputs, Some(drain)))
}

fn assemble_loop_result(
    loop_index: usize,
    outputs: Vec<WorkerOutput>,
    drain: Option<DrainReport>,
) -> LoopStartResult {
    let mut fold = 0u64;
    let mut per_worker = Vec::with_capacity(outputs.len());
    for out in outputs {
        fold = fold.wrapping_add(out.checksum_fold);
        per_worker.push(out.durations);
    }
    LoopStartResult {
        loop_index,
        durations_ns: pool_interleaved(per_worker),
        drain,
        checksum_fold: fold,
    }
}

pub(crate) fn unique_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    let candidate = dir.join(format!("{stem}.{ext}"));
    if !candidate.exists() {
        return candidate;
    }
    for i in 1.. {
        let candidate = dir.join(format!("{stem}-{i}.{ext}"));
        if !candidate.exists() {
            return candidate;
        }
    }
    unreachable!()
}

pub(crate) fn run_stamp(t: &DateTime<Utc>) -> String {
    t.format("%Y%m%dT%H%M%S%3f").to_string()
}

#[derive(Serialize, Deserialize)]
struct RawRunFile {
    schema_version: u32,
    run: BenchmarkRun,
}

/// Persists a run as `run-<timestamp>.json` (never overwriting) and returns
/// the path.
pub fn save_raw_run(run: &BenchmarkRun, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = unique_path(dir, &format!("run-{}", run_stamp(&run.started_at)), "json");
    let file = std::fs::File::create(&path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), &RawRunFile {
        schema_version: RAW_RUN_SCHEMA_VERSION,
        run: run.clone(),
    })?;
    Ok(path)
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema_version: u32,
}

/// Loads and validates a raw-run file. The schema version is checked before
/// the payload is parsed, so files from a different version fail with a
/// migration error instead of a shape mismatch.
pub fn load_raw_run(path: &Path) -> Result<BenchmarkRun> {
    let bytes = std::fs::read(path)?;
    let probe: SchemaProbe = serde_json::from_slice(&bytes)?;
    if probe.schema_version != RAW_RUN_SCHEMA_VERSION {
        return Err(Error::SchemaMismatch {
            found: probe.schema_version,
            expected: RAW_RUN_SCHEMA_VERSION,
        });
    }
    let raw: RawRunFile = serde_json::from_slice(&bytes)?;
    raw.run.config.validate()?;
    Ok(raw.run)
}

/// Executes a full benchmark run: n loop starts, each with fresh state, and
/// persists the raw-run file on success. A failed loop start aborts the run
/// and leaves no raw-run file behind.
pub fn run_benchmark(cfg: &RunConfig) -> Result<CompletedRun> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let started_at = Utc::now();
    let environment = capture_environment();

    let trace_dir = cfg
        .output_dir
        .join(format!("traces-{}", run_stamp(&started_at)));
    let mut loop_results = Vec::with_capacity(cfg.loop_starts);
    for loop_index in 0..cfg.loop_starts {
        loop_results.push(run_single_loop(cfg, loop_index, &trace_dir)?);
    }

    let checksum_fold = loop_results
        .iter()
        .fold(0u64, |acc, l| acc.wrapping_add(l.checksum_fold));
    let run = BenchmarkRun {
        config: cfg.clone(),
        environment,
        started_at,
        loop_results,
        checksum_fold,
    };

    let raw_path = save_raw_run(&run, &cfg.output_dir)?;
    let trace_paths = if cfg.keep_traces && cfg.probe_kind == ProbeKind::BinaryWriter {
        (0..cfg.loop_starts)
            .map(|i| trace_dir.join(format!("trace-loop-{i}.bin")))
            .collect()
    } else {
        Vec::new()
    };
    Ok(CompletedRun {
        run,
        raw_path,
        trace_paths,
    })
}

/// Outcome of a thread sweep: every run that completed, plus the failure
/// that stopped the sweep, if any. Completed runs stay persisted either way.
#[derive(Debug)]
pub struct SweepOutcome {
    pub completed: Vec<CompletedRun>,
    pub failure: Option<(usize, Error)>,
}

/// Runs one benchmark per worker count, identical configuration otherwise.
pub fn run_thread_sweep(base: &RunConfig, worker_counts: &[usize]) -> Result<SweepOutcome> {
    if worker_counts.is_empty() {
        return Err(Error::InvalidConfig("worker count list must be non-empty".into()));
    }
    if worker_counts.contains(&0) {
        return Err(Error::InvalidConfig("worker counts must be >= 1".into()));
    }

    let mut completed = Vec::with_capacity(worker_counts.len());
    for &workers in worker_counts {
        let cfg = RunConfig {
            workers,
            ..base.clone()
        };
        match run_benchmark(&cfg) {
            Ok(done) => completed.push(done),
            Err(e) => {
                return Ok(SweepOutcome {
                    completed,
                    failure: Some((workers, e)),
                })
            }
        }
    }
    Ok(SweepOutcome {
        completed,
        failure: None,
    })
}
