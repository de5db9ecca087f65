//! Flat key=value pipeline configuration with range validation.
//!
//! The file format is one `key=value` pair per line; `#` starts a comment.
//! Unknown keys are rejected so typos cannot silently fall back to
//! defaults. Command-line `--set key=value` overrides file values.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;
use vtv_core::flow::{FlowParams, FlowProvider};
use vtv_core::keyframe::{KeyframeStrategy, SamplingConfig};
use vtv_core::propagate::TubeletGeometry;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` is out of range: {message}")]
    OutOfRange { key: String, message: String },
    #[error("config key `{key}` has unparseable value `{value}`")]
    BadValue { key: String, value: String },
    #[error("malformed config line {line}: expected key=value")]
    Malformed { line: usize },
    #[error("unsupported config schema version {0}")]
    SchemaVersion(u64),
    #[error("io error reading config: {0}")]
    Io(#[from] std::io::Error),
}

pub const CONFIG_SCHEMA_VERSION: u64 = 1;

/// Every tunable of the pipeline, with the documented defaults.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub flow_provider: String,
    pub flow_dir: Option<PathBuf>,
    pub flow_levels: usize,
    pub flow_iterations: usize,
    pub flow_window_radius: usize,
    pub mask_alpha: f64,
    pub mask_beta: usize,
    /// Kernel scale; `None` means the β/2 default.
    pub mask_lambda: Option<f64>,
    pub mask_strategy: String,
    pub tokens_t_patch: usize,
    pub tokens_p: usize,
    pub tokens_rho: f64,
    pub leakage_tau: f64,
    pub leakage_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            flow_provider: "classical".into(),
            flow_dir: None,
            flow_levels: 3,
            flow_iterations: 3,
            flow_window_radius: 2,
            mask_alpha: 0.25,
            mask_beta: 16,
            mask_lambda: None,
            mask_strategy: "middle".into(),
            tokens_t_patch: 2,
            tokens_p: 16,
            tokens_rho: 0.75,
            leakage_tau: 0.05,
            leakage_window: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Malformed { line: i + 1 })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Apply a single override; the key names mirror the config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "schema_version" => {
                let v: u64 = parse_num(key, value)?;
                if v != CONFIG_SCHEMA_VERSION {
                    return Err(ConfigError::SchemaVersion(v));
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "flow.provider" => self.flow_provider = value.into(),
            "flow.dir" => self.flow_dir = Some(PathBuf::from(value)),
            "flow.levels" => self.flow_levels = parse_num(key, value)?,
            "flow.iterations" => self.flow_iterations = parse_num(key, value)?,
            "flow.window_radius" => self.flow_window_radius = parse_num(key, value)?,
            "mask.alpha" => self.mask_alpha = parse_num(key, value)?,
            "mask.beta" => self.mask_beta = parse_num(key, value)?,
            "mask.lambda" => self.mask_lambda = Some(parse_num(key, value)?),
            "mask.strategy" => self.mask_strategy = value.into(),
            "tokens.t_patch" => self.tokens_t_patch = parse_num(key, value)?,
            "tokens.p" => self.tokens_p = parse_num(key, value)?,
            "tokens.rho" => self.tokens_rho = parse_num(key, value)?,
            "leakage.tau" => self.leakage_tau = parse_num(key, value)?,
            "leakage.window" => self.leakage_window = parse_num(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or(ConfigError::Malformed { line: 0 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |key: &str, message: String| ConfigError::OutOfRange {
            key: key.into(),
            message,
        };
        if !(self.mask_alpha > 0.0 && self.mask_alpha < 1.0) {
            return Err(range(
                "mask.alpha",
                format!("must lie in (0, 1), got {}", self.mask_alpha),
            ));
        }
        if self.mask_beta < 2 {
            return Err(range("mask.beta", format!("must be >= 2, got {}", self.mask_beta)));
        }
        if let Some(l) = self.mask_lambda {
            if l <= 0.0 {
                return Err(range("mask.lambda", format!("must be > 0, got {l}")));
            }
        }
        match self.mask_strategy.as_str() {
            "middle" | "max_contact" => {}
            other => {
                return Err(range(
                    "mask.strategy",
                    format!("must be `middle` or `max_contact`, got `{other}`"),
                ))
            }
        }
        match self.flow_provider.as_str() {
            "classical" => {}
            "precomputed" => {
                if self.flow_dir.is_none() {
                    return Err(range(
                        "flow.dir",
                        "required when flow.provider=precomputed".into(),
                    ));
                }
            }
            other => {
                return Err(range(
                    "flow.provider",
                    format!("must be `classical` or `precomputed`, got `{other}`"),
                ))
            }
        }
        if self.flow_levels == 0 {
            return Err(range("flow.levels", "must be >= 1".into()));
        }
        if self.flow_iterations == 0 {
            return Err(range("flow.iterations", "must be >= 1".into()));
        }
        if self.flow_window_radius == 0 {
            return Err(range("flow.window_radius", "must be >= 1".into()));
        }
        if !(self.tokens_rho > 0.0 && self.tokens_rho < 1.0) {
            return Err(range(
                "tokens.rho",
                format!("must lie in (0, 1), got {}", self.tokens_rho),
            ));
        }
        if self.tokens_t_patch == 0 {
            return Err(range("tokens.t_patch", "must be >= 1".into()));
        }
        if self.tokens_p == 0 {
            return Err(range("tokens.p", "must be >= 1".into()));
        }
        if self.leakage_tau <= 0.0 {
            return Err(range(
                "leakage.tau",
                format!("must be > 0, got {}", self.leakage_tau),
            ));
        }
        if self.leakage_window == 0 {
            return Err(range("leakage.window", "must be >= 1".into()));
        }
        Ok(())
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams {
            pyramid_levels: self.flow_levels,
            iterations: self.flow_iterations,
            window_radius: self.flow_window_radius,
        }
    }

    pub fn flow_provider(&self) -> FlowProvider {
        match self.flow_provider.as_str() {
            "precomputed" => {
                FlowProvider::Precomputed(self.flow_dir.clone().expect("validated"))
            }
            _ => FlowProvider::ClassicalPyramidal(self.flow_params()),
        }
    }

    pub fn keyframe_strategy(&self) -> KeyframeStrategy {
        match self.mask_strategy.as_str() {
            "max_contact" => KeyframeStrategy::MaxContact,
            _ => KeyframeStrategy::Middle,
        }
    }

    pub fn sampling(&self, seed: u64) -> SamplingConfig {
        let lambda = self
            .mask_lambda
            .unwrap_or_else(|| SamplingConfig::default_lambda(self.mask_beta));
        SamplingConfig::new(self.mask_alpha, self.mask_beta, lambda, seed)
            .expect("ranges validated by PipelineConfig::validate")
    }

    pub fn geometry(&self) -> TubeletGeometry {
        TubeletGeometry {
            t_patch: self.tokens_t_patch,
            p: self.tokens_p,
        }
    }

    /// Flat, sorted key→value view for run reports.
    pub fn as_parameters(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("schema_version".into(), CONFIG_SCHEMA_VERSION.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("flow.provider".into(), self.flow_provider.clone());
        if let Some(d) = &self.flow_dir {
            m.insert("flow.dir".into(), d.display().to_string());
        }
        m.insert("flow.levels".into(), self.flow_levels.to_string());
        m.insert("flow.iterations".into(), self.flow_iterations.to_string());
        m.insert(
            "flow.window_radius".into(),
            self.flow_window_radius.to_string(),
        );
        m.insert("mask.alpha".into(), self.mask_alpha.to_string());
        m.insert("mask.beta".into(), self.mask_beta.to_string());
        if let Some(l) = self.mask_lambda {
            m.insert("mask.lambda".into(), l.to_string());
        }
        m.insert("mask.strategy".into(), self.mask_strategy.clone());
        m.insert("tokens.t_patch".into(), self.tokens_t_patch.to_string());
        m.insert("tokens.p".into(), self.tokens_p.to_string());
        m.insert("tokens.rho".into(), self.tokens_rho.to_string());
        m.insert("leakage.tau".into(), self.leakage_tau.to_string());
        m.insert("leakage.window".into(), self.leakage_window.to_string());
        m
    }
}
