use impetus_core::anomaly::OutlierPolicy;
use impetus_core::attention::{ClusterConfig, SoftOr};
use impetus_core::features::FeatureSpec;
use impetus_core::mil::MilConfig;
use impetus_core::triage::TriageConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const MASTER_SEED_ENV: &str = "IMPETUS_MASTER_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub master_seed: u64,
    pub features: FeatureSpec,
    pub iforest_trees: usize,
    pub iforest_max_samples: usize,
    pub outlier_policy: OutlierPolicy,
    pub cluster: ClusterConfig,
    /// Name of the attention rule in the registry.
    pub attention_rule: String,
    pub mil: MilConfig,
    pub triage: TriageConfig,
    /// Group positive patches with 4-connectivity instead of 8.
    pub four_connected: bool,
    /// Train one model per slide from that slide's labels only.
    pub per_slide_models: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            features: FeatureSpec::default(),
            iforest_trees: 100,
            iforest_max_samples: 256,
            outlier_policy: OutlierPolicy::default(),
            cluster: ClusterConfig::default(),
            attention_rule: SoftOr::NAME.to_string(),
            mil: MilConfig::default(),
            triage: TriageConfig::default(),
            four_connected: false,
            per_slide_models: false,
        }
    }
}

impl SessionConfig {
    /// Replaces the master seed with the environment override, if set.
    pub fn apply_env(mut self) -> Result<Self> {
        if let Ok(raw) = std::env::var(MASTER_SEED_ENV) {
            self.master_seed = raw
                .trim()
                .parse()
                .map_err(|_| ServiceError::BadRequest(format!("{MASTER_SEED_ENV}={raw:?} is not a u64")))?;
        }
        Ok(self)
    }
}
