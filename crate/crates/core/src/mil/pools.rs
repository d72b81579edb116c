use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::assign::{assign_positive_cluster, ClusterSplit};
use super::kmeans::split_kmeans;
use super::tsne::embed_tsne;
use super::MilConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::derive_seed;
use crate::slide::{PatchBounds, PatchCoord};

/// One labelled instance with its origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub slide_id: String,
    pub patch: PatchCoord,
    pub features: Vec<f64>,
}

/// The tissue patches of one labelled box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxInstances {
    pub entries: Vec<PoolEntry>,
}

impl BoxInstances {
    /// Collects the bound matrix's rows inside `bounds`.
    pub fn from_matrix(slide_id: &str, matrix: &FeatureMatrix, bounds: &PatchBounds) -> Result<Self> {
        if !matrix.is_bound() {
            return Err(Error::Misaligned("feature matrix is not bound to a grid".into()));
        }
        let entries: Vec<PoolEntry> = matrix
            .rows_in(bounds)
            .into_iter()
            .map(|i| PoolEntry {
                slide_id: slide_id.to_string(),
                patch: matrix.patches()[i],
                features: matrix.row(i).iter().map(|&v| f64::from(v)).collect(),
            })
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyBox);
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A positive box waiting for the first negative label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeferredBox {
    pub instances: BoxInstances,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PositiveOutcome {
    Deferred,
    Ingested {
        added: usize,
        discarded: usize,
        /// Absent when the box took the degenerate path.
        split: Option<ClusterSplit>,
    },
}

/// Positive, negative and discarded instances, plus deferred positive boxes.
///
/// Every labelled tissue patch lives in exactly one place. A later label
/// covering the same patch moves it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingPools {
    dimension: Option<usize>,
    positive: Vec<PoolEntry>,
    negative: Vec<PoolEntry>,
    discarded: Vec<PoolEntry>,
    deferred: Vec<DeferredBox>,
}

impl TrainingPools {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn positive(&self) -> &[PoolEntry] {
        &self.positive
    }

    pub fn negative(&self) -> &[PoolEntry] {
        &self.negative
    }

    pub fn discarded(&self) -> &[PoolEntry] {
        &self.discarded
    }

    pub fn deferred(&self) -> &[DeferredBox] {
        &self.deferred
    }

    pub fn deferred_count(&self) -> usize {
        self.deferred.iter().map(|b| b.instances.len()).sum()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    /// Instances held anywhere, which equals the distinct labelled tissue patches.
    pub fn total(&self) -> usize {
        self.positive.len() + self.negative.len() + self.discarded.len() + self.deferred_count()
    }

    fn admit(&mut self, instances: &BoxInstances) -> Result<()> {
        if instances.is_empty() {
            return Err(Error::EmptyBox);
        }
        let dim = self.dimension.unwrap_or(instances.entries[0].features.len());
        if let Some(bad) = instances.entries.iter().find(|e| e.features.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.features.len(),
            });
        }
        self.dimension = Some(dim);
        let keys: HashSet<(&str, PatchCoord)> = instances
            .entries
            .iter()
            .map(|e| (e.slide_id.as_str(), e.patch))
            .collect();
        let keep = |e: &PoolEntry| !keys.contains(&(e.slide_id.as_str(), e.patch));
        self.positive.retain(keep);
        self.negative.retain(keep);
        self.discarded.retain(keep);
        for b in &mut self.deferred {
            b.instances.entries.retain(keep);
        }
        self.deferred.retain(|b| !b.instances.is_empty());
        Ok(())
    }

    /// Appends every instance to the negative pool, then processes any
    /// deferred positive boxes in arrival order.
    pub fn ingest_negative_box(&mut self, instances: BoxInstances, config: &MilConfig) -> Result<Vec<PositiveOutcome>> {
        self.admit(&instances)?;
        self.negative.extend(instances.entries);
        let queued = std::mem::take(&mut self.deferred);
        queued
            .into_iter()
            .map(|b| self.process_positive(b.instances, config, b.seed))
            .collect()
    }

    /// Splits the box and keeps only its tumor-like cluster. Deferred when
    /// no negative exists yet.
    pub fn ingest_positive_box(&mut self, instances: BoxInstances, config: &MilConfig, seed: u64) -> Result<PositiveOutcome> {
        self.admit(&instances)?;
        if self.negative.is_empty() {
            self.deferred.push(DeferredBox { instances, seed });
            return Ok(PositiveOutcome::Deferred);
        }
        self.process_positive(instances, config, seed)
    }

    fn process_positive(&mut self, instances: BoxInstances, config: &MilConfig, seed: u64) -> Result<PositiveOutcome> {
        let entries = instances.entries;
        let n = entries.len();
        let rows: Vec<Vec<f64>> = entries.iter().map(|e| e.features.clone()).collect();
        let distinct_rows = rows.iter().skip(1).any(|r| r != &rows[0]);
        if n < 4 || !distinct_rows {
            self.positive.extend(entries);
            return Ok(PositiveOutcome::Ingested {
                added: n,
                discarded: 0,
                split: None,
            });
        }
        let mut tsne = config.tsne;
        tsne.perplexity = tsne.perplexity.min((n - 1) as f64 / 3.0);
        let embedding = embed_tsne(&rows, derive_seed(seed, 0, "", "tsne"), &tsne)?;
        let km = split_kmeans(&embedding, derive_seed(seed, 0, "", "kmeans"));
        if km.degenerate {
            self.positive.extend(entries);
            return Ok(PositiveOutcome::Ingested {
                added: n,
                discarded: 0,
                split: None,
            });
        }
        let negatives: Vec<Vec<f64>> = self.negative.iter().map(|e| e.features.clone()).collect();
        let positive_cluster = assign_positive_cluster(
            &km.assignment,
            &rows,
            &negatives,
            &config.forest,
            derive_seed(seed, 0, "", "temp-rf"),
        )?;
        let mut added = 0;
        for (e, &k) in entries.into_iter().zip(&km.assignment) {
            if k == positive_cluster {
                self.positive.push(e);
                added += 1;
            } else {
                self.discarded.push(e);
            }
        }
        Ok(PositiveOutcome::Ingested {
            added,
            discarded: n - added,
            split: Some(ClusterSplit {
                embedding,
                assignment: km.assignment,
                positive_cluster,
                degenerate: false,
            }),
        })
    }
}
