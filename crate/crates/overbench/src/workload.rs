//! The monitored workload: a deterministic recursive method with probe hook
//! points compiled in at every recursion level.
//!
//! The method does no work besides recursing (and an optional busy-wait per
//! level), so the per-call cost is dominated by whatever the attached probe
//! does in its hooks.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on recursion depth, keeping stack use bounded.
pub const MAX_RECURSION_DEPTH: u32 = 65_536;

/// Hook points fired by the monitored method.
///
/// `on_enter` and `on_exit` each fire exactly once per recursion level, so a
/// call at depth d produces 2*d hook firings. Record-emitting probes turn
/// each enter/exit pair into one monitoring record.
pub trait Probe {
    fn on_enter(&mut self);
    fn on_exit(&mut self);
}

/// Parameters of the monitored method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    recursion_depth: u32,
    spin_ns: u64,
    signature: String,
}

impl WorkloadConfig {
    /// Validates and builds a workload. Depth must be at least 1 and the
    /// signature non-empty.
    pub fn new(recursion_depth: u32, spin_ns: u64, signature: impl Into<String>) -> Result<Self> {
        let signature = signature.into();
        if recursion_depth == 0 {
            return Err(Error::InvalidConfig("recursion depth must be >= 1".into()));
        }
        if recursion_depth > MAX_RECURSION_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "recursion depth {recursion_depth} exceeds the supported maximum {MAX_RECURSION_DEPTH}"
            )));
        }
        if signature.is_empty() {
            return Err(Error::InvalidConfig("signature must be non-empty".into()));
        }
        Ok(WorkloadConfig {
            recursion_depth,
            spin_ns,
            signature,
        })
    }

    pub fn recursion_depth(&self) -> u32 {
        self.recursion_depth
    }

    pub fn spin_ns(&self) -> u64 {
        self.spin_ns
    }

    pub fn signature(&self) -> &str {
        &self.signature
    }

    /// The closed-form checksum a call at this depth must produce: 1 + 2 + ... + depth.
    pub fn expected_checksum(&self) -> u64 {
        let d = self.recursion_depth as u64;
        d * (d + 1) / 2
    }
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        // Pure recursion, no per-level work: probe cost dominates.
        WorkloadConfig {
            recursion_depth: 10,
            spin_ns: 0,
            signature: "monitoredMethod()".into(),
        }
    }
}

/// Result of one timed top-level call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CallOutcome {
    /// Deterministic function of depth; the runner folds these into one value
    /// so the optimizer cannot remove the calls.
    pub checksum: u64,
    pub duration_ns: u64,
}

/// Active spin on the monotonic clock. Never sleeps: sleeping would add the
/// scheduler noise this harness exists to measure, not create.
#[inline]
fn busy_wait(spin_ns: u64) {
    if spin_ns == 0 {
        return;
    }
    let start = Instant::now();
    while (start.elapsed().as_nanos() as u64) < spin_ns {
        std::hint::spin_loop();
    }
}

fn monitored_method<P: Probe>(depth: u32, spin_ns: u64, probe: &mut P) -> u64 {
    probe.on_enter();
    busy_wait(spin_ns);
    let mut sum = depth as u64;
    if depth > 1 {
        sum += monitored_method(depth - 1, spin_ns, probe);
    }
    probe.on_exit();
    sum
}

/// Runs one top-level monitored call and times it with the monotonic clock.
///
/// The method recurses exactly `cfg.recursion_depth()` times, firing the
/// probe hooks once per level. Only the top-level call is timed.
pub fn execute_monitored_call<P: Probe>(cfg: &WorkloadConfig, probe: &mut P) -> CallOutcome {
    let start = Instant::now();
    let checksum = monitored_method(cfg.recursion_depth, cfg.spin_ns, probe);
    let duration_ns = start.elapsed().as_nanos() as u64;
    CallOutcome {
        checksum: std::hint::black_box(checksum),
        duration_ns,
    }
}
