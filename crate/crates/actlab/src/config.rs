//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "pendulum"
//! seeds = [0, 1, 2]
//! env = { id = "pendulum" }
//!
//! [[modes]]
//! kind = "torque"
//!
//! [[modes]]
//! kind = "position"
//! gains = { kp_pc = 10.0, kd_pc = 1.0 }
//!
//! [ppo]
//! total_env_steps = 150000
//! ```
//!
//! Unknown keys are rejected. With `desk_scale = false`, sample-count keys
//! that are not set explicitly take their full-scale values.

use std::path::{Path, PathBuf};

use actlab_core::actuation::{
    default_gain_grid, tune_gains, ActionBounds, ActuationConfig, ActuationKind, ControllerGains,
};
use actlab_core::envs::EnvConfig;
use actlab_core::gradsim::GradSimConfig;
use actlab_core::landscape::LandscapeConfig;
use actlab_core::ppo::{PpoConfig, TrainSetup};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

/// Environment variable overriding `output_root`.
pub const OUTPUT_ROOT_ENV: &str = "ACTLAB_OUTPUT";

/// Full-scale values applied when `desk_scale = false`.
pub mod full_scale {
    pub const SAMPLES_PER_CELL: usize = 200_000;
    pub const ORACLE_SAMPLES: usize = 10_000_000;
    pub const LARGE_BATCH: usize = 100_000;
    pub const TOTAL_ENV_STEPS: u64 = 1_000_000;
}

/// Desk-scale large-batch size for accurate-gradient runs.
pub const DESK_LARGE_BATCH: usize = 10_000;

/// Seed used when tuning controller gains.
pub const TUNE_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub kind: ActuationKind,
    /// Omitted gains for velocity/position control are tuned on the
    /// default grid when the config is resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<ControllerGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<ActionBounds>,
}

impl ModeConfig {
    pub fn new(kind: ActuationKind) -> Self {
        Self {
            kind,
            gains: None,
            bounds: None,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn default_modes() -> Vec<ModeConfig> {
    vec![ModeConfig::new(ActuationKind::Torque)]
}
fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_root() -> PathBuf {
    PathBuf::from("runs")
}
fn default_true() -> bool {
    true
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeConfig>,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_root")]
    pub output_root: PathBuf,
    #[serde(default = "default_true")]
    pub desk_scale: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub ppo: PpoConfig,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    #[serde(default)]
    pub gradsim: GradSimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::parse("").expect("empty config is valid")
    }
}

fn has_key(table: &toml::Table, section: &str, key: &str) -> bool {
    table
        .get(section)
        .and_then(|v| v.as_table())
        .is_some_and(|t| t.contains_key(key))
}

impl ExperimentConfig {
    /// Parses TOML text, applying full-scale sample counts where
    /// `desk_scale = false` and the key is absent.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| AppError::config(e.to_string()))?;
        let mut cfg: ExperimentConfig = table
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| AppError::config(e.to_string()))?;
        if !cfg.desk_scale {
            if !has_key(&table, "landscape", "samples_per_cell") {
                cfg.landscape.samples_per_cell = full_scale::SAMPLES_PER_CELL;
            }
            if !has_key(&table, "gradsim", "oracle_samples") {
                cfg.gradsim.oracle_samples = full_scale::ORACLE_SAMPLES;
            }
            if !has_key(&table, "ppo", "total_env_steps") {
                cfg.ppo.total_env_steps = full_scale::TOTAL_ENV_STEPS;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            AppError::Config(m) => AppError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Large-batch size for accurate-gradient runs at this scale.
    pub fn large_batch(&self) -> usize {
        if self.desk_scale {
            DESK_LARGE_BATCH
        } else {
            full_scale::LARGE_BATCH
        }
    }

    /// Output root: `ACTLAB_OUTPUT` overrides the config value.
    pub fn resolved_output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_root.clone(),
        }
    }

    /// Checks every part and fills in tuned gains, so the result can be
    /// snapshotted with all defaults expanded.
    pub fn resolve(mut self) -> Result<Self> {
        if self.modes.is_empty() {
            return Err(AppError::config("at least one actuation mode is required"));
        }
        if self.seeds.is_empty() {
            return Err(AppError::config("at least one seed is required"));
        }
        let mut kinds: Vec<ActuationKind> = self.modes.iter().map(|m| m.kind).collect();
        kinds.sort_by_key(|k| k.name());
        kinds.dedup();
        if kinds.len() != self.modes.len() {
            return Err(AppError::config("each actuation mode may appear only once"));
        }
        self.ppo.validate()?;
        self.landscape.validate()?;
        self.gradsim.validate()?;
        self.env.spec().validate()?;
        for m in &mut self.modes {
            if m.gains.is_none() && matches!(m.kind, ActuationKind::Velocity | ActuationKind::Position) {
                let report = tune_gains(
                    &self.env,
                    m.kind,
                    &default_gain_grid(m.kind),
                    m.bounds.as_ref(),
                    self.env.spec().horizon,
                    TUNE_SEED,
                )?;
                m.gains = Some(report.selected);
            }
        }
        for m in &self.modes {
            self.setup(m, self.seeds[0]).validate()?;
        }
        Ok(self)
    }

    pub fn actuation(&self, mode: &ModeConfig) -> ActuationConfig {
        ActuationConfig {
            kind: mode.kind,
            gains: mode.gains.unwrap_or_default(),
            bounds: mode.bounds.clone(),
        }
    }

    pub fn setup(&self, mode: &ModeConfig, seed: u64) -> TrainSetup {
        TrainSetup {
            env: self.env.clone(),
            actuation: self.actuation(mode),
            hidden_layers: self.hidden_layers.clone(),
            ppo: self.ppo.clone(),
            seed,
        }
    }

    pub fn mode(&self, kind: ActuationKind) -> Option<&ModeConfig> {
        self.modes.iter().find(|m| m.kind == kind)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AppError::Other(format!("cannot serialize config: {e}")))
    }
}

/// Parses a seed list: `3`, `0..10` (exclusive end) or `1,4,7`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || AppError::config(format!("invalid seed list '{s}' (use N, A..B or A,B,C)"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}
