use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gr::{GrConfig, GrMethod};
use crate::train::{FloodConfig, TrainConfig, DEFAULT_EXPLODE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodTag {
    None,
    Fgr,
    Bgr,
    Db,
}

/// One `(method, ε, γ)` cell of a sweep. `epsilon` is ignored by `none` and `db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub method: MethodTag,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl GridEntry {
    pub fn new(method: MethodTag, epsilon: f64, gamma: f64) -> Self {
        Self { method, epsilon, gamma }
    }

    pub fn gr_config(&self) -> Result<GrConfig> {
        match self.method {
            MethodTag::None => Ok(GrConfig::plain()),
            MethodTag::Fgr => GrConfig::new(GrMethod::forward(self.epsilon)?, self.gamma),
            MethodTag::Bgr => GrConfig::new(GrMethod::backward(self.epsilon)?, self.gamma),
            MethodTag::Db => GrConfig::new(GrMethod::DoubleBackprop, self.gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub eta: f64,
    pub max_steps: usize,
    pub loss_tol: f64,
    pub explode_threshold: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { eta: 1e-3, max_steps: 10_000_000, loss_tol: 1e-8, explode_threshold: DEFAULT_EXPLODE_THRESHOLD }
    }
}

impl TrainSettings {
    pub fn train_config(&self, gr: GrConfig) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            eta: self.eta,
            gr,
            max_steps: self.max_steps,
            loss_tol: self.loss_tol,
            explode_threshold: self.explode_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Data, initialization and training settings shared by every run of a sweep.
///
/// Defaults reproduce the synthetic setting `d = 100, n = 50, μ = σ² = 5`,
/// `α₀ ~ N(0, 0.1²)`, `η = 10⁻³`, training until the loss drops below `10⁻⁸`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: usize,
    pub n_test: usize,
    pub mu: f64,
    pub sigma2: f64,
    pub k_star: usize,
    pub alpha0_std: f64,
    pub seed: u64,
    /// Sweeps use seeds `seed, seed + 1, …, seed + n_seeds − 1`.
    pub n_seeds: u64,
    pub train: TrainSettings,
    pub grid: Vec<GridEntry>,
    /// Settings for `flooding-demo`.
    pub flood: Option<FloodConfig>,
    /// Compute the top Hessian eigenvalue at the end of each run.
    pub lambda_max: bool,
}

pub const DEFAULT_EPSILON_GRID: [f64; 5] = [0.005, 0.01, 0.02, 0.05, 0.1];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let gamma = 0.02;
        let mut grid = vec![GridEntry::new(MethodTag::Db, 0.0, gamma)];
        for method in [MethodTag::Fgr, MethodTag::Bgr] {
            grid.extend(DEFAULT_EPSILON_GRID.iter().map(|&e| GridEntry::new(method, e, gamma)));
        }
        Self {
            d: 100,
            n: 50,
            n_test: 1000,
            mu: 5.0,
            sigma2: 5.0,
            k_star: 5,
            alpha0_std: 0.1,
            seed: 0,
            n_seeds: 1,
            train: TrainSettings::default(),
            grid,
            flood: None,
            lambda_max: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidParameter(msg.into()));
        if self.d == 0 || self.n == 0 || self.n_test == 0 {
            return invalid("d, n and n_test must be positive");
        }
        if self.k_star == 0 || self.k_star > self.d {
            return invalid("k_star must lie in 1..=d");
        }
        if !self.mu.is_finite() || !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return invalid("mu must be finite and sigma2 positive");
        }
        if !(self.alpha0_std > 0.0 && self.alpha0_std.is_finite()) {
            return invalid("alpha0_std must be positive");
        }
        if self.n_seeds == 0 {
            return invalid("n_seeds must be positive");
        }
        for entry in &self.grid {
            self.train.train_config(entry.gr_config()?)?;
        }
        if let Some(flood) = &self.flood {
            flood.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds).map(|i| self.seed.wrapping_add(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.grid.len(), 11);
        assert_eq!(cfg.seeds(), vec![0]);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"d": 20, "n": 10, "seed": 7, "n_seeds": 3,
                "train": {"eta": 0.002},
                "grid": [{"method": "fgr", "epsilon": 0.05, "gamma": 0.02}, {"method": "none"}]}"#,
        )
        .unwrap();
        assert_eq!((cfg.d, cfg.n, cfg.k_star), (20, 10, 5));
        assert_eq!(cfg.train.eta, 0.002);
        assert_eq!(cfg.train.loss_tol, 1e-8);
        assert_eq!(cfg.seeds(), vec![7, 8, 9]);
        assert_eq!(cfg.grid[1].gr_config().unwrap(), GrConfig::plain());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ExperimentConfig::from_json(r#"{"dim": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"grid": [{"method": "fgr", "eps": 0.1}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"d": 3, "k_star": 4}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"n_test": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"grid": [{"method": "fgr", "epsilon": 0.0}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"alpha0_std": -1.0}"#).is_err());
    }
}
