//! Command-line entry point tying the modules together for CI and desk use.
//!
//! Exit code contract: 0 = success / no regression, 1 = regression or change
//! detected (or trace violations found), 2 = usage or validation error,
//! 3 = integrity or I/O error.

mod file_config;

pub use file_config::{load_file_config, FileConfig};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::history::{self, RegressionPolicy, RegressionReport, DEFAULT_RATIO_THRESHOLD};
use crate::probe::{verify_trace_file, ProbeKind, PutStrategyKind, VerificationReport};
use crate::runner::{
    self, load_raw_run, run_single_loop, save_raw_run, BenchmarkRun, CompletedRun,
    LoopStartResult, RunConfig,
};
use crate::stats::{self, MdeConfig, MdeMode, RunSummaries};
use crate::workload::WorkloadConfig;

const ENV_OUTPUT_DIR: &str = "OVERBENCH_OUT";

#[derive(Parser, Debug)]
#[command(
    name = "overbench",
    version,
    about = "Measures observability-pipeline overhead and the smallest performance change an environment can detect"
)]
struct Cli {
    /// Emit machine-readable JSON on stdout and nothing else there.
    #[arg(long, global = true)]
    json: bool,
    /// Config file with defaults (falls back to ./overbench.toml when present).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute one benchmark run and print its summary.
    Run(RunArgs),
    /// Run the benchmark across several worker counts and export CSV.
    Sweep(SweepArgs),
    /// Summarize a previously recorded raw-run file.
    Analyze(AnalyzeArgs),
    /// Decide whether two raw-run files differ (exit 1 when they do).
    Compare(CompareArgs),
    /// Print the minimal detectable change for a given sigma.
    Mde(MdeArgs),
    /// Export raw runs in the benchmark-action JSON format.
    Export(ExportArgs),
    /// Verify a binary trace file (exit 1 on violations).
    Verify(VerifyArgs),
    /// Internal: execute a single loop start in a fresh process.
    #[command(hide = true)]
    SpawnLoop(SpawnLoopArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProbeFlag {
    Baseline,
    BinaryWriter,
}

impl From<ProbeFlag> for ProbeKind {
    fn from(f: ProbeFlag) -> Self {
        match f {
            ProbeFlag::Baseline => ProbeKind::Baseline,
            ProbeFlag::BinaryWriter => ProbeKind::BinaryWriter,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum StrategyFlag {
    Sp,
    Yield,
}

impl From<StrategyFlag> for PutStrategyKind {
    fn from(f: StrategyFlag) -> Self {
        match f {
            StrategyFlag::Sp => PutStrategyKind::SingleProducerBlocking,
            StrategyFlag::Yield => PutStrategyKind::Yield,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeFlag {
    Table,
    Power,
}

impl From<ModeFlag> for MdeMode {
    fn from(f: ModeFlag) -> Self {
        match f {
            ModeFlag::Table => MdeMode::TableConsistent,
            ModeFlag::Power => MdeMode::TwoSamplePower,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CheckFlag {
    Ratio,
    Statistical,
}

/// Flags shared by `run` and `sweep`.
#[derive(Args, Debug)]
struct RunCommonArgs {
    /// Probe to attach (sweep runs both kinds when omitted).
    #[arg(long, value_enum)]
    probe: Option<ProbeFlag>,
    /// Loop starts per run (n).
    #[arg(long)]
    loops: Option<usize>,
    /// Monitored calls per worker per loop start.
    #[arg(long)]
    calls: Option<usize>,
    /// Recursion depth of the monitored method.
    #[arg(long)]
    depth: Option<u32>,
    /// Busy-wait nanoseconds per recursion level.
    #[arg(long)]
    spin_ns: Option<u64>,
    /// Signature label of the monitored operation.
    #[arg(long)]
    signature: Option<String>,
    /// Queue put strategy.
    #[arg(long, value_enum)]
    put_strategy: Option<StrategyFlag>,
    /// Queue capacity in records.
    #[arg(long)]
    capacity: Option<usize>,
    /// Fraction of each loop start discarded as warmup.
    #[arg(long)]
    warmup: Option<f64>,
    /// Output directory (env OVERBENCH_OUT overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Delete per-loop trace files after successful verification.
    #[arg(long)]
    discard_traces: bool,
    /// Run a put strategy with a mismatched producer count anyway. The run
    /// will normally fail trace verification; that is the point.
    #[arg(long)]
    unsafe_allow_mismatch: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: RunCommonArgs,
    /// Concurrent benchmark workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Append the run to this history file.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Commit id recorded in the history entry (default: git HEAD or "unknown").
    #[arg(long)]
    commit: Option<String>,
    /// After appending, check the history for regressions (exit 1 on alert).
    #[arg(long, value_enum, requires = "history")]
    check: Option<CheckFlag>,
    /// Threshold for the ratio check.
    #[arg(long)]
    ratio_threshold: Option<f64>,
    /// Alpha for the statistical check.
    #[arg(long)]
    alpha: Option<f64>,
    /// One fresh process per loop start instead of in-process state reset.
    #[arg(long)]
    spawn: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: RunCommonArgs,
    /// Comma-separated worker counts, e.g. 1,2,4,8,12.
    #[arg(long, value_delimiter = ',', required = true)]
    workers_list: Vec<usize>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Raw-run file written by `run` or `sweep`.
    run_file: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Raw-run file of the reference version.
    baseline_run: PathBuf,
    /// Raw-run file of the candidate version.
    candidate_run: PathBuf,
    /// Significance level of the change decision.
    #[arg(long)]
    alpha: Option<f64>,
    /// Compare runs from different environments anyway.
    #[arg(long)]
    allow_env_mismatch: bool,
}

#[derive(Args, Debug)]
struct MdeArgs {
    /// Relative standard deviation, in percent.
    #[arg(long)]
    sigma: f64,
    /// Loop starts per side.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeFlag>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Raw-run files to export (one array element per run).
    #[arg(required = true)]
    run_files: Vec<PathBuf>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Binary trace file to verify.
    trace_file: PathBuf,
    /// Also require this exact record count (loss detection).
    #[arg(long)]
    expect_records: Option<u64>,
}

#[derive(Args, Debug)]
struct SpawnLoopArgs {
    #[arg(long)]
    config_file: PathBuf,
    #[arg(long)]
    loop_index: usize,
    #[arg(long)]
    trace_dir: PathBuf,
}

/// Parses arguments, dispatches, and maps every outcome onto the exit-code
/// contract. This is everything the binary does.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let file = load_file_config(cli.config.as_deref())?;
    match cli.command {
        Command::Run(args) => cmd_run(args, &file, cli.json),
        Command::Sweep(args) => cmd_sweep(args, &file, cli.json),
        Command::Analyze(args) => cmd_analyze(args, cli.json),
        Command::Compare(args) => cmd_compare(args, &file, cli.json),
        Command::Mde(args) => cmd_mde(args, &file, cli.json),
        Command::Export(args) => cmd_export(args),
        Command::Verify(args) => cmd_verify(args, cli.json),
        Command::SpawnLoop(args) => cmd_spawn_loop(args),
    }
}

fn parse_probe_name(name: &str) -> Result<ProbeKind> {
    match name {
        "baseline" => Ok(ProbeKind::Baseline),
        "binary-writer" => Ok(ProbeKind::BinaryWriter),
        other => Err(Error::InvalidConfig(format!(
            "unknown probe '{other}' (expected baseline or binary-writer)"
        ))),
    }
}

fn parse_strategy_name(name: &str) -> Result<PutStrategyKind> {
    match name {
        "sp" => Ok(PutStrategyKind::SingleProducerBlocking),
        "yield" => Ok(PutStrategyKind::Yield),
        other => Err(Error::InvalidConfig(format!(
            "unknown put strategy '{other}' (expected sp or yield)"
        ))),
    }
}

fn parse_mode_name(name: &str) -> Result<MdeMode> {
    match name {
        "table" => Ok(MdeMode::TableConsistent),
        "power" => Ok(MdeMode::TwoSamplePower),
        other => Err(Error::InvalidConfig(format!(
            "unknown mde mode '{other}' (expected table or power)"
        ))),
    }
}

/// Layers one run configuration: flag > env (output dir) > config file >
/// built-in default.
fn resolve_run_config(a: &RunCommonArgs, workers: Option<usize>, file: &FileConfig) -> Result<RunConfig> {
    let defaults = RunConfig::default();

    let probe_kind = match (a.probe, file.run.probe.as_deref()) {
        (Some(flag), _) => flag.into(),
        (None, Some(name)) => parse_probe_name(name)?,
        (None, None) => defaults.probe_kind,
    };
    let put_strategy_kind = match (a.put_strategy, file.run.put_strategy.as_deref()) {
        (Some(flag), _) => flag.into(),
        (None, Some(name)) => parse_strategy_name(name)?,
        (None, None) => defaults.put_strategy_kind,
    };
    let depth = a
        .depth
        .or(file.run.depth)
        .unwrap_or(defaults.workload.recursion_depth());
    let spin_ns = a.spin_ns.or(file.run.spin_ns).unwrap_or(defaults.workload.spin_ns());
    let signature = a
        .signature
        .clone()
        .or_else(|| file.run.signature.clone())
        .unwrap_or_else(|| defaults.workload.signature().to_string());
    let output_dir = a
        .out
        .clone()
        .or_else(|| std::env::var_os(ENV_OUTPUT_DIR).map(PathBuf::from))
        .or_else(|| file.run.out.clone())
        .unwrap_or(defaults.output_dir);

    let cfg = RunConfig {
        loop_starts: a.loops.or(file.run.loops).unwrap_or(defaults.loop_starts),
        calls_per_loop: a.calls.or(file.run.calls).unwrap_or(defaults.calls_per_loop),
        warmup_fraction: a.warmup.or(file.run.warmup).unwrap_or(defaults.warmup_fraction),
        workers: workers.or(file.run.workers).unwrap_or(defaults.workers),
        probe_kind,
        workload: WorkloadConfig::new(depth, spin_ns, signature)?,
        queue_capacity: a.capacity.or(file.run.capacity).unwrap_or(defaults.queue_capacity),
        put_strategy_kind,
        unsafe_allow_mismatch: a.unsafe_allow_mismatch,
        output_dir,
        keep_traces: !a.discard_traces,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_commit_id(explicit: Option<String>) -> String {
    if let Some(commit) = explicit {
        return commit;
    }
    std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn mde_for_run(run: &BenchmarkRun, summaries: &RunSummaries) -> Result<(f64, f64)> {
    let sigma = summaries.per_loop.rel_stddev;
    let table = stats::minimal_detectable_change(
        sigma,
        &MdeConfig {
            n: run.config.loop_starts,
            mode: MdeMode::TableConsistent,
            ..MdeConfig::default()
        },
    )?;
    let power = stats::minimal_detectable_change(
        sigma,
        &MdeConfig {
            n: run.config.loop_starts,
            mode: MdeMode::TwoSamplePower,
            ..MdeConfig::default()
        },
    )?;
    Ok((table, power))
}

fn run_report_json(run: &BenchmarkRun, summaries: &RunSummaries, raw_path: Option<&Path>) -> Result<serde_json::Value> {
    let (delta_table, delta_power) = mde_for_run(run, summaries)?;
    Ok(json!({
        "config": run.config,
        "environment": run.environment,
        "started_at": run.started_at,
        "summaries": summaries,
        "mde": {
            "n": run.config.loop_starts,
            "table_pct": delta_table * 100.0,
            "power_pct": delta_power * 100.0,
        },
        "checksum_fold": run.checksum_fold,
        "raw_path": raw_path,
    }))
}

fn print_run_table(run: &BenchmarkRun, summaries: &RunSummaries, raw_path: Option<&Path>) -> Result<()> {
    let cfg = &run.config;
    println!("probe            {}", cfg.probe_kind.label());
    println!("workers          {}", cfg.workers);
    println!(
        "loop starts      {} x {} calls, warmup {:.2}",
        cfg.loop_starts, cfg.calls_per_loop, cfg.warmup_fraction
    );
    println!(
        "workload         depth {}, spin {} ns, signature {}",
        cfg.workload.recursion_depth(),
        cfg.workload.spin_ns(),
        cfg.workload.signature()
    );
    println!(
        "environment      {} / {} / {} cpus [{}]",
        run.environment.hostname,
        run.environment.cpu_model,
        run.environment.logical_cpus,
        run.environment.digest()
    );
    println!();
    println!("  basis           count      mean ns/call    stddev ns    rel sigma");
    for s in [&summaries.per_call, &summaries.per_loop] {
        let basis = match s.basis {
            stats::SampleBasis::PerCall => "per-call",
            stats::SampleBasis::PerLoopMean => "per-loop mean",
        };
        println!(
            "  {:<15} {:<10} {:<15.2} {:<12.2} {:.2}%",
            basis,
            s.count,
            s.mean_ns,
            s.stddev_ns,
            s.rel_stddev * 100.0
        );
    }
    let (delta_table, delta_power) = mde_for_run(run, summaries)?;
    println!();
    println!(
        "detectable change (n={}, alpha 0.01, beta 0.01): table {:.2}%, power {:.2}%",
        run.config.loop_starts,
        delta_table * 100.0,
        delta_power * 100.0
    );
    println!("checksum fold    {:#018x}", run.checksum_fold);
    if let Some(p) = raw_path {
        println!("raw run          {}", p.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let cfg = resolve_run_config(&args.common, args.workers, file)?;
    let completed = if args.spawn {
        run_benchmark_spawned(&cfg)?
    } else {
        runner::run_benchmark(&cfg)?
    };
    let summaries = completed.run.summaries()?;

    let mut history_len = None;
    let mut regressions: Option<RegressionReport> = None;
    if let Some(history_path) = &args.history {
        let commit = resolve_commit_id(args.commit);
        let updated = history::append_run(history_path, &completed.run, &commit)?;
        history_len = Some(updated.entries.len());
        if let Some(check) = args.check {
            let policy = match check {
                CheckFlag::Ratio => RegressionPolicy::Ratio(
                    args.ratio_threshold
                        .or(file.history.ratio_threshold)
                        .unwrap_or(DEFAULT_RATIO_THRESHOLD),
                ),
                CheckFlag::Statistical => {
                    RegressionPolicy::Statistical(args.alpha.or(file.compare.alpha).unwrap_or(0.01))
                }
            };
            regressions = Some(history::check_regression(&updated, policy)?);
        }
    }

    let alert_count = regressions.as_ref().map_or(0, |r| r.alerts.len());
    if json {
        let mut report = run_report_json(&completed.run, &summaries, Some(&completed.raw_path))?;
        report["trace_files"] = json!(completed.trace_paths);
        report["history_entries"] = json!(history_len);
        report["regressions"] = json!(regressions);
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_run_table(&completed.run, &summaries, Some(&completed.raw_path))?;
        if !completed.trace_paths.is_empty() {
            println!(
                "traces           {} file(s) under {}",
                completed.trace_paths.len(),
                completed.trace_paths[0].parent().unwrap_or(Path::new(".")).display()
            );
        }
        if let Some(len) = history_len {
            println!("history          entry {} appended", len);
        }
        if let Some(report) = &regressions {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for a in &report.alerts {
                println!("regression       {}", a.message);
            }
        }
    }
    Ok(if alert_count > 0 { 1 } else { 0 })
}

// Rows carry the loop-mean basis: per-call pooled stddev is dominated by
// scheduling tails and says little about run-to-run noise.
fn sweep_csv_row(completed: &CompletedRun) -> Result<String> {
    let s = completed.run.summaries()?;
    Ok(format!(
        "{},{},{:.2},{:.2},{:.4}",
        completed.run.config.workers,
        completed.run.config.probe_kind.flag_name(),
        s.per_loop.mean_ns,
        s.per_loop.stddev_ns,
        s.per_loop.rel_stddev * 100.0
    ))
}

pub const SWEEP_CSV_HEADER: &str = "workers,probe,mean_ns,stddev_ns,rel_stddev";

fn cmd_sweep(args: SweepArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let base = resolve_run_config(&args.common, Some(1), file)?;
    let kinds: Vec<ProbeKind> = match args.common.probe {
        Some(flag) => vec![flag.into()],
        None => vec![ProbeKind::Baseline, ProbeKind::BinaryWriter],
    };

    let mut rows = Vec::new();
    let mut failure: Option<(ProbeKind, usize, Error)> = None;
    'kinds: for kind in kinds {
        let cfg = RunConfig {
            probe_kind: kind,
            ..base.clone()
        };
        let outcome = runner::run_thread_sweep(&cfg, &args.workers_list)?;
        for completed in &outcome.completed {
            rows.push(sweep_csv_row(completed)?);
        }
        if let Some((workers, e)) = outcome.failure {
            failure = Some((kind, workers, e));
            break 'kinds;
        }
    }

    std::fs::create_dir_all(&base.output_dir)?;
    let csv_path = runner::unique_path(
        &base.output_dir,
        &format!("sweep-{}", runner::run_stamp(&Utc::now())),
        "csv",
    );
    let mut csv = String::with_capacity(64 * (rows.len() + 1));
    csv.push_str(SWEEP_CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    std::fs::write(&csv_path, &csv)?;

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "csv_path": csv_path,
                "worker_counts": args.workers_list,
                "rows": rows,
                "failure": failure.as_ref().map(|(kind, workers, e)| json!({
                    "probe": kind.flag_name(),
                    "workers": workers,
                    "error": e.to_string(),
                })),
            }))?
        );
    } else {
        println!("sweep CSV        {}", csv_path.display());
        print!("{csv}");
    }

    match failure {
        Some((kind, workers, e)) => {
            eprintln!(
                "sweep aborted at probe {} with {} workers: {e} (completed runs are persisted)",
                kind.flag_name(),
                workers
            );
            Ok(e.exit_code())
        }
        None => Ok(0),
    }
}

fn cmd_analyze(args: AnalyzeArgs, json: bool) -> Result<u8> {
    let run = load_raw_run(&args.run_file)?;
    let summaries = run.summaries()?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&run_report_json(&run, &summaries, None)?)?
        );
    } else {
        print_run_table(&run, &summaries, None)?;
    }
    Ok(0)
}

fn cmd_compare(args: CompareArgs, file: &FileConfig, json: bool) -> Result<u8> {
    let a = load_raw_run(&args.baseline_run)?;
    let b = load_raw_run(&args.candidate_run)?;
    if a.config.comparability_digest() != b.config.comparability_digest() {
        return Err(Error::Comparability(
            "run configurations differ; only the code under test may change".into(),
        ));
    }
    if !args.allow_env_mismatch && !a.environment.same_environment(&b.environment) {
        return Err(Error::Comparability(
            "runs come from different environments (--allow-env-mismatch to override)".into(),
        ));
    }
    let alpha = args.alpha.or(file.compare.alpha).unwrap_or(0.01);
    let sa = a.summaries()?;
    let sb = b.summaries()?;
    let decision = stats::detect_change(&sa.loop_means_ns, &sb.loop_means_ns, alpha)?;

    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "baseline_run": args.baseline_run,
                "candidate_run": args.candidate_run,
                "decision": decision,
            }))?
        );
    } else {
        println!(
            "baseline mean    {:.2} ns/call  (sigma {:.2}%)",
            sa.per_loop.mean_ns,
            sa.per_loop.rel_stddev * 100.0
        );
        println!(
            "candidate mean   {:.2} ns/call  (sigma {:.2}%)",
            sb.per_loop.mean_ns,
            sb.per_loop.rel_stddev * 100.0
        );
        println!(
            "decision         changed = {} ({:+.2}%, p = {:.3e}, alpha = {})",
            decision.changed,
            decision.relative_change * 100.0,
            decision.p_value,
            alpha
        );
    }
    Ok(if decision.changed { 1 } else { 0 })
}

fn cmd_mde(args: MdeArgs, file: &FileConfig, json: bool) -> Result<u8> {
    if args.sigma < 0.0 {
        return Err(Error::Domain(format!(
            "sigma must be non-negative, got {}",
            args.sigma
        )));
    }
    let mode = match (args.mode, file.mde.mode.as_deref()) {
        (Some(flag), _) => flag.into(),
        (None, Some(name)) => parse_mode_name(name)?,
        (None, None) => MdeMode::TableConsistent,
    };
    let cfg = MdeConfig {
        n: args.n.or(file.mde.n).unwrap_or(10),
        alpha: args.alpha.or(file.mde.alpha).unwrap_or(0.01),
        beta: args.beta.or(file.mde.beta).unwrap_or(0.01),
        mode,
    };
    let delta = stats::minimal_detectable_change(args.sigma / 100.0, &cfg)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "sigma_pct": args.sigma,
                "n": cfg.n,
                "alpha": cfg.alpha,
                "beta": cfg.beta,
                "mode": cfg.mode,
                "delta_pct": delta * 100.0,
            }))?
        );
    } else {
        println!(
            "minimal detectable change: {:.2}% (sigma {:.2}%, n {}, mode {})",
            delta * 100.0,
            args.sigma,
            cfg.n,
            match mode {
                MdeMode::TableConsistent => "table",
                MdeMode::TwoSamplePower => "power",
            }
        );
    }
    Ok(0)
}

fn cmd_export(args: ExportArgs) -> Result<u8> {
    let runs: Vec<BenchmarkRun> = args
        .run_files
        .iter()
        .map(|p| load_raw_run(p))
        .collect::<Result<_>>()?;
    let refs: Vec<&BenchmarkRun> = runs.iter().collect();
    let value = history::export_gab_json(&refs)?;
    let text = serde_json::to_string_pretty(&value)?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn verify_outcome(report: &VerificationReport, expect_records: Option<u64>) -> bool {
    report.is_clean() && expect_records.is_none_or(|n| report.records == n)
}

fn cmd_verify(args: VerifyArgs, json: bool) -> Result<u8> {
    let report = verify_trace_file(&args.trace_file)?;
    let clean = verify_outcome(&report, args.expect_records);
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "trace_file": args.trace_file,
                "report": report,
                "expected_records": args.expect_records,
                "clean": clean,
            }))?
        );
    } else {
        println!(
            "records {}  traces {}  registry entries {}",
            report.records, report.traces, report.registry_entries
        );
        if let Some(n) = args.expect_records {
            println!(
                "expected records {} -> {}",
                n,
                if report.records == n { "ok" } else { "MISMATCH" }
            );
        }
        if report.violations.is_empty() && report.unknown_signature_ids.is_empty() {
            println!("no violations");
        } else {
            for v in &report.violations {
                println!("violation: {v:?}");
            }
            if report.violations_truncated {
                println!("... violation list truncated");
            }
            if !report.unknown_signature_ids.is_empty() {
                println!("unknown signature ids: {:?}", report.unknown_signature_ids);
            }
        }
    }
    Ok(if clean { 0 } else { 1 })
}

fn cmd_spawn_loop(args: SpawnLoopArgs) -> Result<u8> {
    let file = std::fs::File::open(&args.config_file)?;
    let cfg: RunConfig = serde_json::from_reader(std::io::BufReader::new(file))?;
    let result = run_single_loop(&cfg, args.loop_index, &args.trace_dir)?;
    println!("{}", serde_json::to_string(&result)?);
    Ok(0)
}

/// Spawn mode: one fresh process per loop start, maximum isolation. The
/// child executes the hidden `spawn-loop` subcommand and prints its loop
/// result as JSON.
fn run_benchmark_spawned(cfg: &RunConfig) -> Result<CompletedRun> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let started_at = Utc::now();
    let environment = runner::capture_environment();
    let trace_dir = cfg
        .output_dir
        .join(format!("traces-{}", runner::run_stamp(&started_at)));

    let config_file = tempfile::Builder::new()
        .prefix("overbench-cfg-")
        .suffix(".json")
        .tempfile_in(&cfg.output_dir)?;
    serde_json::to_writer(&config_file, cfg)?;
    let exe = std::env::current_exe()?;

    let mut loop_results: Vec<LoopStartResult> = Vec::with_capacity(cfg.loop_starts);
    for loop_index in 0..cfg.loop_starts {
        let output = std::process::Command::new(&exe)
            .arg("spawn-loop")
            .arg("--config-file")
            .arg(config_file.path())
            .arg("--loop-index")
            .arg(loop_index.to_string())
            .arg("--trace-dir")
            .arg(&trace_dir)
            .output()?;
        if !output.status.success() {
            return Err(Error::Integrity(format!(
                "spawned loop start {loop_index} failed: {}",
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        loop_results.push(serde_json::from_slice(&output.stdout)?);
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

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_file_config() -> FileConfig {
        FileConfig::default()
    }

    #[test]
    fn run_config_defaults_resolve() {
        let args = RunCommonArgs {
            probe: None,
            loops: None,
            calls: None,
            depth: None,
            spin_ns: None,
            signature: None,
            put_strategy: None,
            capacity: None,
            warmup: None,
            out: Some(PathBuf::from("/tmp/overbench-test")),
            discard_traces: false,
            unsafe_allow_mismatch: false,
        };
        let cfg = resolve_run_config(&args, None, &empty_file_config()).unwrap();
        assert_eq!(cfg.loop_starts, 10);
        assert_eq!(cfg.calls_per_loop, 100_000);
        assert_eq!(cfg.probe_kind, ProbeKind::BinaryWriter);
        assert_eq!(cfg.put_strategy_kind, PutStrategyKind::Yield);
        assert_eq!(cfg.queue_capacity, 10_000);
    }

    #[test]
    fn flags_override_file_values() {
        let mut file = empty_file_config();
        file.run.loops = Some(4);
        file.run.probe = Some("baseline".into());
        let args = RunCommonArgs {
            probe: None,
            loops: Some(7),
            calls: None,
            depth: None,
            spin_ns: None,
            signature: None,
            put_strategy: None,
            capacity: None,
            warmup: None,
            out: Some(PathBuf::from("/tmp/overbench-test")),
            discard_traces: false,
            unsafe_allow_mismatch: false,
        };
        let cfg = resolve_run_config(&args, None, &file).unwrap();
        assert_eq!(cfg.loop_starts, 7); // flag wins
        assert_eq!(cfg.probe_kind, ProbeKind::Baseline); // file fills the gap
    }

    #[test]
    fn mde_reference_value_through_cli_layer() {
        let cfg = MdeConfig::default();
        let delta = stats::minimal_detectable_change(1.97 / 100.0, &cfg).unwrap();
        assert!((delta * 100.0 - 4.41).abs() < 0.01);
    }

    #[test]
    fn verify_outcome_checks_expected_count() {
        let report = VerificationReport {
            records: 10,
            traces: 1,
            registry_entries: 1,
            violations: vec![],
            violations_truncated: false,
            unknown_signature_ids: vec![],
        };
        assert!(verify_outcome(&report, None));
        assert!(verify_outcome(&report, Some(10)));
        assert!(!verify_outcome(&report, Some(11)));
    }
}
