//! Isolation-forest outlier detection over patch features.

mod forest;

pub use forest::{average_path_length, fit_forest, ForestConfig, IsolationForest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How anomaly scores become a binary outlier mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum OutlierPolicy {
    /// Outlier iff score > threshold.
    FixedThreshold { threshold: f64 },
    /// Flag the `round(fraction · n)` highest scores; lower patch index wins ties.
    Contamination { fraction: f64 },
}

impl Default for OutlierPolicy {
    fn default() -> Self {
        Self::FixedThreshold { threshold: 0.5 }
    }
}

pub fn outlier_mask(scores: &[f64], policy: OutlierPolicy) -> Result<Vec<bool>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite score {s}")));
    }
    match policy {
        OutlierPolicy::FixedThreshold { threshold } => {
            Ok(scores.iter().map(|&s| s > threshold).collect())
        }
        OutlierPolicy::Contamination { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidParameter(format!("contamination {fraction}")));
            }
            let k = (fraction * scores.len() as f64).round() as usize;
            let mut order: Vec<usize> = (0..scores.len()).collect();
            // stable sort keeps index order among equal scores
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
            let mut mask = vec![false; scores.len()];
            for &i in &order[..k] {
                mask[i] = true;
            }
            Ok(mask)
        }
    }
}
