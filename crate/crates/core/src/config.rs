//! Run configuration: every knob of a pipeline run in one TOML document.
//!
//! Missing keys take their defaults and unknown keys are rejected, so a
//! config written by [`RunConfig::to_toml`] reproduces the run exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentPlan, Pipeline, PlanRow};
use crate::features::FeatureConfig;
use crate::gan::GanConfig;
use crate::ingest::{ColumnMap, SimulationConfig};
use crate::nn::TrainConfig;
use crate::preprocess::PcaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingConfig {
    pub window_len: usize,
    pub stride: usize,
    pub test_fraction: f64,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self { window_len: 1000, stride: 500, test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub hidden_dim: usize,
    /// Standardize every feature column with train-split statistics.
    pub standardize: bool,
    pub train: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { hidden_dim: 200, standardize: false, train: TrainConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub rows: Vec<PlanRow>,
    pub seeds: Vec<u64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            rows: vec![
                PlanRow { real_fraction: 0.5, synthetic: false },
                PlanRow { real_fraction: 0.5, synthetic: true },
                PlanRow { real_fraction: 1.0, synthetic: false },
            ],
            seeds: (1..=5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; per-stage seeds are derived from it by name.
    pub seed: u64,
    pub windowing: WindowingConfig,
    pub ingest: ColumnMap,
    pub simulation: SimulationConfig,
    pub pca: PcaConfig,
    pub features: FeatureConfig,
    pub classifier: ClassifierConfig,
    pub gan: GanConfig,
    pub plan: PlanConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            pca: self.pca.clone(),
            features: self.features.clone(),
            classifier: self.classifier.clone(),
            gan: self.gan.clone(),
        }
    }

    pub fn experiment_plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            rows: self.plan.rows.clone(),
            test_fraction: self.windowing.test_fraction,
            seeds: self.plan.seeds.clone(),
            pipeline: self.pipeline(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig { seed: 42, ..RunConfig::default() };
        cfg.classifier.train.lr = 0.1 + 0.2;
        cfg.plan.seeds = vec![7, 8];
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_and_unknown_keys() {
        let cfg = RunConfig::from_toml("seed = 3\n[pca]\nk = 4\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.pca.k, 4);
        assert_eq!(cfg.windowing, WindowingConfig::default());
        assert!(matches!(RunConfig::from_toml("sed = 3\n"), Err(Error::Config(_))));
    }
}
