//! Optional `overbench.toml` defaults. Flags override file values; the
//! `OVERBENCH_OUT` environment variable overrides the output directory from
//! the file (but not an explicit `--out`).

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub mde: MdeSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub history: HistorySection,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub probe: Option<String>,
    pub loops: Option<usize>,
    pub calls: Option<usize>,
    pub depth: Option<u32>,
    pub spin_ns: Option<u64>,
    pub signature: Option<String>,
    pub workers: Option<usize>,
    pub put_strategy: Option<String>,
    pub capacity: Option<usize>,
    pub warmup: Option<f64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdeSection {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mode: Option<String>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub alpha: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySection {
    pub ratio_threshold: Option<f64>,
}

/// Loads the config file. An explicit path must exist; the implicit
/// `./overbench.toml` is optional.
pub fn load_file_config(explicit: Option<&Path>) -> Result<FileConfig> {
    let (path, required) = match explicit {
        Some(p) => (p.to_path_buf(), true),
        None => (PathBuf::from("overbench.toml"), false),
    };
    match std::fs::read_to_string(&path) {
        Ok(content) => toml::from_str(&content).map_err(|e| {
            Error::InvalidConfig(format!("{}: {e}", path.display()))
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && !required => {
            Ok(FileConfig::default())
        }
        Err(e) => Err(Error::InvalidConfig(format!(
            "cannot read config {}: {e}",
            path.display()
        ))),
    }
}
