//! Summary statistics, normal quantiles, minimal detectable change, and
//! two-run change decisions.
//!
//! All relative quantities (`rel_stddev`, detectable change) are dimensionless
//! fractions; callers that want percentages multiply by 100 at the edge.

mod normal;
mod ttest;

pub use normal::{normal_cdf, normal_pdf, normal_quantile};
pub use ttest::{student_t_two_sided_p, welch_t_test, WelchTest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What one summarized sample represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleBasis {
    /// Each sample is one monitored call.
    PerCall,
    /// Each sample is the mean of one loop start.
    PerLoopMean,
}

/// Mean, standard deviation, and relative standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub mean_ns: f64,
    /// Sample standard deviation (divisor count - 1).
    pub stddev_ns: f64,
    /// stddev / mean, as a fraction.
    pub rel_stddev: f64,
    pub basis: SampleBasis,
    /// Number of retained samples after warmup removal.
    pub count: usize,
}

/// Drops the leading warmup fraction of a series.
///
/// `floor(len * warmup_fraction)` values are discarded from the front, the
/// non-steady-state part of a fresh loop start.
pub fn strip_warmup<T>(values: &[T], warmup_fraction: f64) -> Result<&[T]> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::InvalidConfig(format!(
            "warmup fraction must lie in [0, 1), got {warmup_fraction}"
        )));
    }
    let skip = (values.len() as f64 * warmup_fraction).floor() as usize;
    Ok(&values[skip..])
}

/// Mean and sample standard deviation over the values retained after warmup
/// removal. Fails unless at least 2 values remain.
pub fn summarize(values: &[f64], warmup_fraction: f64, basis: SampleBasis) -> Result<StatsSummary> {
    let retained = strip_warmup(values, warmup_fraction)?;
    if retained.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 values after warmup removal, have {}",
            retained.len()
        )));
    }
    let n = retained.len() as f64;
    let mean = retained.iter().sum::<f64>() / n;
    let ss: f64 = retained.iter().map(|x| (x - mean) * (x - mean)).sum();
    let stddev = (ss / (n - 1.0)).sqrt();
    let rel = if mean != 0.0 { stddev / mean } else { 0.0 };
    Ok(StatsSummary {
        mean_ns: mean,
        stddev_ns: stddev,
        rel_stddev: rel,
        basis,
        count: retained.len(),
    })
}

/// Per-loop means after stripping each loop's own warmup fraction.
pub fn loop_means(loops: &[Vec<u64>], warmup_fraction: f64) -> Result<Vec<f64>> {
    loops
        .iter()
        .map(|durations| {
            let retained = strip_warmup(durations, warmup_fraction)?;
            if retained.is_empty() {
                return Err(Error::InsufficientData(
                    "a loop start has no samples left after warmup removal".into(),
                ));
            }
            Ok(retained.iter().map(|&d| d as f64).sum::<f64>() / retained.len() as f64)
        })
        .collect()
}

/// Both summary bases for one run's duration series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummaries {
    /// Pooled post-warmup per-call durations across all loop starts.
    pub per_call: StatsSummary,
    /// Means of the individual loop starts (the basis for detectability).
    pub per_loop: StatsSummary,
    pub loop_means_ns: Vec<f64>,
}

/// Summarizes a run's per-loop duration series on both bases.
pub fn summarize_loops(loops: &[Vec<u64>], warmup_fraction: f64) -> Result<RunSummaries> {
    let mut pooled = Vec::new();
    for durations in loops {
        pooled.extend(strip_warmup(durations, warmup_fraction)?.iter().map(|&d| d as f64));
    }
    let per_call = summarize(&pooled, 0.0, SampleBasis::PerCall)?;
    let means = loop_means(loops, warmup_fraction)?;
    let per_loop = summarize(&means, 0.0, SampleBasis::PerLoopMean)?;
    Ok(RunSummaries {
        per_call,
        per_loop,
        loop_means_ns: means,
    })
}

/// Which detectability formula to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdeMode {
    /// delta = sqrt(n/2) * sigma. Reproduces the published reference pairs
    /// this toolkit is calibrated against.
    TableConsistent,
    /// delta = (z_{1-alpha/2} + z_{1-beta}) / sqrt(n/2) * sigma, the standard
    /// two-sample power formula under a normal approximation.
    TwoSamplePower,
}

/// Inputs for the minimal-detectable-change computation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MdeConfig {
    /// Number of loop starts per side.
    pub n: usize,
    /// Type-I error budget (false alarm).
    pub alpha: f64,
    /// Type-II error budget (miss).
    pub beta: f64,
    pub mode: MdeMode,
}

impl Default for MdeConfig {
    fn default() -> Self {
        MdeConfig {
            n: 10,
            alpha: 0.01,
            beta: 0.01,
            mode: MdeMode::TableConsistent,
        }
    }
}

impl MdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!(
                "mde needs n >= 2 loop starts, got {}",
                self.n
            )));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Smallest relative change distinguishable from noise with relative standard
/// deviation `rel_stddev`, given the error budgets in `cfg`.
///
/// Pure and monotone in `rel_stddev`; both modes scale linearly with it.
pub fn minimal_detectable_change(rel_stddev: f64, cfg: &MdeConfig) -> Result<f64> {
    cfg.validate()?;
    if rel_stddev.is_nan() || rel_stddev < 0.0 {
        return Err(Error::Domain(format!(
            "relative standard deviation must be non-negative, got {rel_stddev}"
        )));
    }
    let half_n_sqrt = (cfg.n as f64 / 2.0).sqrt();
    let delta = match cfg.mode {
        MdeMode::TableConsistent => half_n_sqrt * rel_stddev,
        MdeMode::TwoSamplePower => {
            let z_a = normal_quantile(1.0 - cfg.alpha / 2.0)?;
            let z_b = normal_quantile(1.0 - cfg.beta)?;
            (z_a + z_b) / half_n_sqrt * rel_stddev
        }
    };
    Ok(delta)
}

/// Outcome of comparing two runs' loop-start means.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChangeDecision {
    pub changed: bool,
    /// (mean_b - mean_a) / mean_a.
    pub relative_change: f64,
    pub p_value: f64,
    pub t_stat: f64,
    pub df: f64,
    pub alpha: f64,
}

/// Welch two-sample test on per-loop means at level `alpha`.
///
/// Caller is responsible for ensuring the two runs are comparable
/// (same workload and measurement configuration).
pub fn detect_change(a_loop_means: &[f64], b_loop_means: &[f64], alpha: f64) -> Result<ChangeDecision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let test = welch_t_test(a_loop_means, b_loop_means)?;
    let mean_a = a_loop_means.iter().sum::<f64>() / a_loop_means.len() as f64;
    let mean_b = b_loop_means.iter().sum::<f64>() / b_loop_means.len() as f64;
    if mean_a == 0.0 {
        return Err(Error::Domain(
            "baseline mean is zero; relative change undefined".into(),
        ));
    }
    Ok(ChangeDecision {
        changed: test.p_value < alpha,
        relative_change: (mean_b - mean_a) / mean_a,
        p_value: test.p_value,
        t_stat: test.t_stat,
        df: test.df,
        alpha,
    })
}
