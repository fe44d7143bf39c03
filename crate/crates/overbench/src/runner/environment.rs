//! Snapshot of the execution environment, so runs from different machines
//! are never pooled by the history layer.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Where a run was measured. Two runs are only comparable when their
/// identity digests match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentDescriptor {
    pub hostname: String,
    pub os_name: String,
    pub os_version: String,
    pub cpu_model: String,
    pub logical_cpus: u32,
    /// Total memory of the host in bytes; 0 when unknown.
    pub memory_bound_bytes: u64,
    /// Median of back-to-back monotonic clock reads, always > 0.
    pub clock_resolution_ns: u64,
}

impl EnvironmentDescriptor {
    /// Hash of the identity fields. The clock resolution estimate is
    /// excluded: it jitters between captures on the same machine.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for field in [
            self.hostname.as_str(),
            self.os_name.as_str(),
            self.os_version.as_str(),
            self.cpu_model.as_str(),
        ] {
            hasher.update(field.as_bytes());
            hasher.update([0u8]);
        }
        hasher.update(self.logical_cpus.to_le_bytes());
        hasher.update(self.memory_bound_bytes.to_le_bytes());
        let hex = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        hex[..16].to_string()
    }

    pub fn same_environment(&self, other: &EnvironmentDescriptor) -> bool {
        self.digest() == other.digest()
    }
}

fn read_trimmed(path: &str) -> Option<String> {
    std::fs::read_to_string(path)
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
}

fn os_release_field(key: &str) -> Option<String> {
    let content = std::fs::read_to_string("/etc/os-release").ok()?;
    content.lines().find_map(|line| {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .map(|v| v.trim().trim_matches('"').to_string())
    })
}

fn cpu_model() -> Option<String> {
    let content = std::fs::read_to_string("/proc/cpuinfo").ok()?;
    content.lines().find_map(|line| {
        let (key, value) = line.split_once(':')?;
        if key.trim() == "model name" {
            Some(value.trim().to_string())
        } else {
            None
        }
    })
}

fn total_memory_bytes() -> u64 {
    let Some(content) = std::fs::read_to_string("/proc/meminfo").ok() else {
        return 0;
    };
    content
        .lines()
        .find_map(|line| {
            let rest = line.strip_prefix("MemTotal:")?;
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            Some(kb * 1024)
        })
        .unwrap_or(0)
}

/// Median of 1000 back-to-back monotonic clock deltas, clamped to >= 1 ns.
fn estimate_clock_resolution_ns() -> u64 {
    let mut deltas = Vec::with_capacity(1000);
    let mut prev = Instant::now();
    for _ in 0..1000 {
        let now = Instant::now();
        deltas.push(now.duration_since(prev).as_nanos() as u64);
        prev = now;
    }
    deltas.sort_unstable();
    deltas[deltas.len() / 2].max(1)
}

/// Populates the descriptor from the host; unknown fields become "unknown".
pub fn capture_environment() -> EnvironmentDescriptor {
    let hostname = read_trimmed("/etc/hostname")
        .or_else(|| std::env::var("HOSTNAME").ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| "unknown".into());
    let os_name = os_release_field("NAME").unwrap_or_else(|| std::env::consts::OS.into());
    let os_version = os_release_field("VERSION_ID").unwrap_or_else(|| "unknown".into());
    let cpu_model =
        cpu_model().unwrap_or_else(|| format!("unknown ({})", std::env::consts::ARCH));
    let logical_cpus = std::thread::available_parallelism()
        .map(|n| n.get() as u32)
        .unwrap_or(1);

    EnvironmentDescriptor {
        hostname,
        os_name,
        os_version,
        cpu_model,
        logical_cpus,
        memory_bound_bytes: total_memory_bytes(),
        clock_resolution_ns: estimate_clock_resolution_ns(),
    }
}
