//! Run configuration: JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkConfig;

/// Synthetic source description for configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub dim: usize,
    /// Shared lower bound of every source.
    pub low: f64,
    /// Shared upper bound of every source.
    pub high: f64,
    pub seed: u64,
}

/// Full configuration of an online separation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkConfig,
    /// Synthetic sources to generate, if no input file is given.
    pub source: Option<SourceConfig>,
    /// Whitened input matrix to read instead of generating sources.
    pub input: Option<PathBuf>,
    pub mixing_seed: u64,
    /// Samples to process.
    pub samples: usize,
    /// Trailing window length for SIR evaluation.
    pub eval_window: usize,
    /// Samples between run-log records.
    pub checkpoint_interval: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::default(),
            source: None,
            input: None,
            mixing_seed: 0,
            samples: 200_000,
            eval_window: 2_000,
            checkpoint_interval: 1_000,
            output_dir: PathBuf::from("bsm-out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.network
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.samples == 0 {
            return Err(Error::Config("samples must be >= 1".into()));
        }
        if self.eval_window == 0 {
            return Err(Error::Config("eval_window must be >= 1".into()));
        }
        if self.checkpoint_interval == 0 {
            return Err(Error::Config("checkpoint_interval must be >= 1".into()));
        }
        if let Some(src) = &self.source {
            if src.dim == 0 {
                return Err(Error::Config("source.dim must be >= 1".into()));
            }
            if !(src.low < src.high) {
                return Err(Error::Config(format!(
                    "source bounds degenerate: low {} >= high {}",
                    src.low, src.high
                )));
            }
        }
        Ok(())
    }
}

/// Command-line overrides; any field present wins over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub gamma_sq: Option<f64>,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub init_seed: Option<u64>,
    pub warm_start: Option<bool>,
    pub samples: Option<usize>,
    pub eval_window: Option<usize>,
    pub checkpoint_interval: Option<usize>,
    pub mixing_seed: Option<u64>,
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

/// Loads a run configuration.
///
/// A missing path (or an empty file) starts from the defaults; unknown keys
/// in the file are rejected. Overrides are applied afterwards and the merged
/// result is validated.
pub fn parse_config(path: Option<&Path>, overrides: &ConfigOverrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            if text.trim().is_empty() {
                RunConfig::default()
            } else {
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?
            }
        }
        None => RunConfig::default(),
    };

    if let Some(v) = overrides.gamma_sq {
        config.network.gamma_sq = v;
    }
    if let Some(v) = overrides.eta {
        config.network.eta = v;
    }
    if let Some(v) = overrides.beta {
        config.network.beta = v;
    }
    if let Some(v) = overrides.init_seed {
        config.network.init_seed = v;
    }
    if let Some(v) = overrides.warm_start {
        config.network.dynamics.warm_start = v;
    }
    if let Some(v) = overrides.samples {
        config.samples = v;
    }
    if let Some(v) = overrides.eval_window {
        config.eval_window = v;
    }
    if let Some(v) = overrides.checkpoint_interval {
        config.checkpoint_interval = v;
    }
    if let Some(v) = overrides.mixing_seed {
        config.mixing_seed = v;
    }
    if let Some(v) = &overrides.input {
        config.input = Some(v.clone());
    }
    if let Some(v) = &overrides.output_dir {
        config.output_dir = v.clone();
    }

    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, "  \n").unwrap();
        let cfg = parse_config(Some(&path), &ConfigOverrides::default()).unwrap();
        assert_eq!(cfg.network.gamma_sq, 0.996);
        assert_eq!(cfg.network.eta, 1e-3);
        assert_eq!(cfg.network.beta, 1e-6);
        assert_eq!(cfg.eval_window, 2_000);
        assert_eq!(cfg.checkpoint_interval, 1_000);
    }

    #[test]
    fn out_of_range_value_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"network": {"gamma_sq": 1.2}}"#).unwrap();
        assert!(parse_config(Some(&path), &ConfigOverrides::default()).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"networq": {}}"#).unwrap();
        assert!(parse_config(Some(&path), &ConfigOverrides::default()).is_err());
        std::fs::write(&path, r#"{"network": {"gamma": 0.5}}"#).unwrap();
        assert!(parse_config(Some(&path), &ConfigOverrides::default()).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"network": {"eta": 0.01}}"#).unwrap();
        let overrides = ConfigOverrides {
            eta: Some(0.001),
            ..ConfigOverrides::default()
        };
        let cfg = parse_config(Some(&path), &overrides).unwrap();
        assert_eq!(cfg.network.eta, 0.001);
    }

    #[test]
    fn sparse_activation_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"network": {"activation": {"sparse": {"ceiling": 0.8, "threshold": 0.5}}}}"#,
        )
        .unwrap();
        let cfg = parse_config(Some(&path), &ConfigOverrides::default()).unwrap();
        assert_eq!(
            cfg.network.activation,
            crate::network::Activation::Sparse {
                ceiling: 0.8,
                threshold: 0.5
            }
        );
    }
}
