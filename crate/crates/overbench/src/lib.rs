//! Overbench measures the per-call overhead of an observability pipeline
//! (baseline vs. record-writing probe), quantifies measurement noise per
//! execution environment, and decides which relative performance changes are
//! detectable under configured error budgets.
//!
//! The workload is a recursive method that does nothing but recurse, so the
//! probe attached to its hook points dominates the per-call cost. The
//! record-writing probe pushes one record per recursion level through a
//! bounded queue to a binary trace file, which is verified after every loop
//! start. Summary statistics over n independent loop starts feed the
//! minimal-detectable-change model: given a relative standard deviation and
//! error budgets, how small a regression can this environment actually see?
//!
//! # Start with the examples
//!
//! Each major capability has one runnable example:
//!
//! ```text
//! examples/
//! ├── measure_overhead.rs   # baseline vs binary-writer per-call cost
//! ├── queue_strategies.rs   # put strategies and the producer-mismatch hazard
//! ├── trace_verify.rs       # write a trace through the pipeline, verify it
//! ├── thread_sweep.rs       # duration/stddev evolution with worker count
//! ├── mde_table.rs          # minimal detectable change for sample sigmas
//! ├── compare_runs.rs       # two-run change decision at alpha
//! └── history_export.rs     # append-only history, CI export, regression check
//! ```
//!
//! ```bash
//! cargo run --release --example measure_overhead
//! ```
//!
//! The `overbench` binary wraps the same library surface for CI use; see the
//! README for the subcommands and the exit-code contract.
//!
//! # Library layout
//!
//! - [`workload`] — the monitored recursive method and its probe hook points.
//! - [`probe`] — records, string registry, bounded queue with put
//!   strategies, binary trace writer/reader/verifier.
//! - [`runner`] — loop-start orchestration, worker pooling, environment
//!   capture, raw-run files, thread sweeps.
//! - [`stats`] — summaries, normal quantiles, minimal detectable change,
//!   Welch-based change decisions.
//! - [`history`] — append-only run history, benchmark-action JSON export,
//!   regression policies.
//! - [`cli`] — the command-line surface used by the thin binary.

pub mod cli;
pub mod error;
pub mod history;
pub mod probe;
pub mod runner;
pub mod stats;
pub mod workload;

pub use error::{Error, Result};
