//! End-to-end pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::{AnalyticCostModel, Backend, NativeConfig, TileTrafficModel};
use crate::ranker::RankerConfig;
use crate::reuse::CacheHierarchy;
use crate::rl::{Ladders, RlConfig};
use crate::variants::SearchSpace;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// The GEMM sizes benchmarked by default, as `[M, N, K]`.
pub const DEFAULT_SUITE: [[usize; 3]; 10] = [
    [128, 2048, 4096],
    [320, 3072, 4096],
    [1632, 36548, 1024],
    [2048, 4096, 32],
    [1024, 16, 500000],
    [35, 8457, 2560],
    [31999, 1024, 84],
    [84, 1024, 4096],
    [2048, 1, 128],
    [256, 256, 2048],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub problems: Vec<[usize; 3]>,
    pub cache: CacheHierarchy,
    pub search_space: SearchSpace,
    /// Variants sampled per problem from the search space.
    pub max_variants: usize,
    pub ranker: RankerConfig,
    /// Share of the ranked variants handed to the unroll tuner.
    pub top_fraction: f64,
    /// The tuner's `seed` field is ignored; stage seeds derive from `seed`.
    pub rl: RlConfig,
    pub backend: Backend,
    pub analytic: AnalyticCostModel,
    pub native: NativeConfig,
    pub traffic: TileTrafficModel,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Threads for featurization and tournaments.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            problems: DEFAULT_SUITE.to_vec(),
            cache: CacheHierarchy::cascade_lake(),
            search_space: SearchSpace::default(),
            max_variants: 120,
            ranker: RankerConfig { epochs: 60, max_pairs: Some(2000), ..Default::default() },
            top_fraction: 0.10,
            rl: RlConfig { episodes: 120, ..Default::default() },
            backend: Backend::Analytic,
            analytic: AnalyticCostModel::default(),
            native: NativeConfig::default(),
            traffic: TileTrafficModel::default(),
            out_dir: PathBuf::from("polytune-out"),
            seed: 0,
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.problems.is_empty() {
            return Err(ConfigError::Invalid("no problem sizes".into()));
        }
        if let Some(p) = self.problems.iter().find(|p| p.contains(&0)) {
            return Err(ConfigError::Invalid(format!("problem {p:?} has a zero extent")));
        }
        if self.problems.iter().flatten().any(|&e| e > i32::MAX as usize) {
            return Err(ConfigError::Invalid("problem extents must fit in a C int".into()));
        }
        self.cache.validate().map_err(|e| invalid(&e))?;
        self.search_space.validate().map_err(|e| invalid(&e))?;
        if self.max_variants == 0 {
            return Err(ConfigError::Invalid("max_variants must be positive".into()));
        }
        self.ranker.validate().map_err(|e| invalid(&e))?;
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(ConfigError::Invalid("top_fraction must lie in (0, 1]".into()));
        }
        self.rl.validate().map_err(|e| invalid(&e))?;
        self.analytic.validate().map_err(|e| invalid(&e))?;
        self.native.validate().map_err(|e| invalid(&e))?;
        if self.traffic.level_costs.len() < self.cache.levels.len() {
            return Err(ConfigError::Invalid("traffic model needs a cost per cache level".into()));
        }
        if self.traffic.level_costs.iter().chain([&self.traffic.mac_cost]).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(ConfigError::Invalid("traffic costs must be non-negative".into()));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be positive".into()));
        }
        Ok(())
    }

    /// JSON form without the output directory, which does not affect results.
    pub fn canonical(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("out_dir");
        }
        value
    }

    /// SHA-256 of the compact canonical form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().to_string().as_bytes()))
    }

    /// A reduced configuration for quick runs: smaller samples, fewer
    /// epochs and episodes, same stages.
    pub fn quick() -> Self {
        Self {
            max_variants: 40,
            ranker: RankerConfig { epochs: 30, max_pairs: Some(600), ..Default::default() },
            rl: RlConfig {
                episodes: 60,
                ladders: Ladders { ui: vec![1, 2, 4], uj: vec![16, 32, 48], uk: vec![1, 2, 4] },
                ..Default::default()
            },
            ..Default::default()
        }
    }
}

/// Seed for one stochastic stage, derived from the run seed.
pub fn stage_seed(seed: u64, stage: &str, problem: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{stage}/{problem}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(PipelineConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(PipelineConfig::from_json(r#"{"topfraction": 0.5}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"ranker": {"epoch": 3}}"#).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = PipelineConfig::from_json(r#"{"problems": [[16, 16, 16]], "seed": 3}"#).unwrap();
        assert_eq!(c.problems, vec![[16, 16, 16]]);
        assert_eq!(c.top_fraction, 0.10);
    }

    #[test]
    fn hash_ignores_out_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { out_dir: "elsewhere".into(), ..a.clone() };
        let c = PipelineConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn stage_seeds_differ() {
        assert_ne!(stage_seed(0, "ranker", 0), stage_seed(0, "ranker", 1));
        assert_ne!(stage_seed(0, "ranker", 0), stage_seed(0, "rl", 0));
        assert_eq!(stage_seed(5, "rl", 2), stage_seed(5, "rl", 2));
    }
}
