//! Learning a patch classifier from coarse box labels.
//!
//! Negative boxes go straight to the negative pool. A positive box is only
//! known to contain some tumor, so its patches are embedded with T-SNE,
//! split in two with K-Means, and a temporary forest decides which half is
//! unlike the known negatives. That half joins the positive pool; the other
//! half is set aside. The patch classifier is a random forest on the pools.

mod assign;
mod forest;
mod kmeans;
mod pools;
mod tsne;

pub use assign::{assign_positive_cluster, ClusterSplit};
pub use forest::{ForestParams, RandomForest};
pub use kmeans::{split_kmeans, KMeansSplit};
pub use pools::{BoxInstances, DeferredBox, PoolEntry, PositiveOutcome, TrainingPools};
pub use tsne::{embed_tsne, TsneConfig};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::slide::PatchBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    RecommendationBox,
    Marquee,
}

/// A box label: positive means at least one tumor patch inside, negative
/// means none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgileLabel {
    pub slide_id: String,
    pub bounds: PatchBounds,
    pub label: LabelKind,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub source: LabelSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MilConfig {
    pub tsne: TsneConfig,
    pub forest: ForestParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilModel {
    pub forest: RandomForest,
    pub feature_dimension: usize,
    pub training_iteration: u32,
    pub seed: u64,
}

/// Trains the patch classifier on positives (label 1) then negatives.
pub fn train_mil_rf(pools: &TrainingPools, params: &ForestParams, iteration: u32, seed: u64) -> Result<MilModel> {
    if pools.positive().is_empty() {
        return Err(Error::EmptyPool("positive"));
    }
    if pools.negative().is_empty() {
        return Err(Error::EmptyPool("negative"));
    }
    let x: Vec<Vec<f64>> = pools
        .positive()
        .iter()
        .chain(pools.negative())
        .map(|e| e.features.clone())
        .collect();
    let y: Vec<bool> = (0..x.len()).map(|i| i < pools.positive().len()).collect();
    let forest = RandomForest::fit(&x, &y, params, seed)?;
    Ok(MilModel {
        feature_dimension: forest.dimension(),
        forest,
        training_iteration: iteration,
        seed,
    })
}

/// Tumor probability per matrix row.
pub fn predict_map(model: &MilModel, features: &FeatureMatrix) -> Result<Vec<f64>> {
    if features.dimension() != model.feature_dimension {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dimension,
            actual: features.dimension(),
        });
    }
    (0..features.n_patches())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = features.row(i).iter().map(|&v| f64::from(v)).collect();
            model.forest.predict_proba(&row)
        })
        .collect()
}
