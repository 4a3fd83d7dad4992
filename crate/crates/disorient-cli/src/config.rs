//! Run configuration: one JSON document, with flag overrides on top.

use std::path::{Path, PathBuf};

use disorient_core::attack::Strategy;
use disorient_core::defense::DefenseParams;
use disorient_core::metrics::EvalConfig;
use disorient_core::occlusion::{AttackTarget, Mode};
use disorient_core::registration::{Backend, RegistrationParams};
use disorient_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Where the per-frame odometry used by void detection comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdometrySource {
    Gt,
    Estimated,
}

/// Everything a run needs. Flags override file values, file values
/// override these defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset root holding `sequences/<id>/velodyne` and `poses/`.
    pub dataset: PathBuf,
    pub sequences: Vec<String>,
    pub backend: Backend,
    pub strategies: Vec<Strategy>,
    pub k_values: Vec<usize>,
    /// Patch side lengths in meters.
    pub side_values: Vec<f64>,
    /// Patch yaw offsets in degrees.
    pub yaw_values: Vec<f64>,
    pub mode: Mode,
    pub attack_target: AttackTarget,
    pub seed: u64,
    pub eval: EvalConfig,
    pub registration: RegistrationParams,
    pub defense: DefenseParams,
    pub odometry: OdometrySource,
    /// Worker threads; 0 keeps the executor's default.
    pub workers: usize,
    /// Lifts the k ≤ 10 bounds check.
    pub allow_large_k: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            sequences: vec!["00".into()],
            backend: Backend::Feature,
            strategies: vec![Strategy::TopK, Strategy::RandK, Strategy::MinK],
            k_values: (0..=10).collect(),
            side_values: vec![2.1],
            yaw_values: vec![0.0],
            mode: Mode::Shadow,
            attack_target: AttackTarget::Source,
            seed: 0,
            eval: EvalConfig::default(),
            registration: RegistrationParams::default(),
            defense: DefenseParams::default(),
            odometry: OdometrySource::Gt,
            workers: 0,
            allow_large_k: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParam(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` when given, otherwise starts from defaults; then
    /// applies flag overrides.
    pub fn resolve(
        path: Option<&Path>,
        seed: Option<u64>,
        workers: Option<usize>,
    ) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(w) = workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() {
            return Err(Error::InvalidParam("sequences must not be empty".into()));
        }
        if self.strategies.is_empty()
            || self.k_values.is_empty()
            || self.side_values.is_empty()
            || self.yaw_values.is_empty()
        {
            return Err(Error::InvalidParam(
                "strategies, k_values, side_values, and yaw_values must not be empty".into(),
            ));
        }
        if !self.allow_large_k {
            if let Some(&k) = self.k_values.iter().find(|&&k| k > 10) {
                return Err(Error::InvalidParam(format!(
                    "k={k} is outside [0, 10]; set allow_large_k to override"
                )));
            }
        }
        if self
            .side_values
            .iter()
            .any(|s| !(*s > 0.0) || !s.is_finite())
        {
            return Err(Error::InvalidParam(
                "side_values must be positive and finite".into(),
            ));
        }
        if self.yaw_values.iter().any(|y| !(-90.0..=90.0).contains(y)) {
            return Err(Error::InvalidParam(
                "yaw_values must lie within [-90, 90] degrees".into(),
            ));
        }
        self.eval.validate()?;
        self.defense.validate()?;
        Ok(())
    }

    /// The attack cell used by single-cell commands (`attack`,
    /// `trajectory`, `replay`): first strategy, first non-zero k,
    /// first side, first yaw.
    pub fn single_cell(&self) -> (Strategy, usize, f64, f64) {
        let k = self
            .k_values
            .iter()
            .copied()
            .find(|&k| k > 0)
            .unwrap_or(0);
        (
            self.strategies[0],
            k,
            self.side_values[0],
            self.yaw_values[0],
        )
    }
}
