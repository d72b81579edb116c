use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average unsuccessful-search path length in a binary search tree of `n`
/// points, used to normalise isolation depths.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_samples: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Internal {
        feature: u32,
        split: f64,
        left: u32,
        right: u32,
    },
    External {
        size: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    fn path_length(&self, x: &[f32]) -> f64 {
        let mut node = 0usize;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => {
                    node = if f64::from(x[feature as usize]) < split {
                        left as usize
                    } else {
                        right as usize
                    };
                    depth += 1.0;
                }
                Node::External { size } => return depth + average_path_length(size as usize),
            }
        }
    }

    fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Internal { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
                Node::External { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

struct TreeBuilder<'a> {
    data: &'a FeatureMatrix,
    height_limit: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::External { size: idx.len() as u32 });
        if idx.len() <= 1 || depth >= self.height_limit {
            return id;
        }
        // features with a nonzero range among this node's points
        let dim = self.data.dimension();
        let mut candidates: Vec<(u32, f64, f64)> = Vec::new();
        for f in 0..dim {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for &i in idx.iter() {
                let v = self.data.row(i)[f];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                candidates.push((f as u32, f64::from(lo), f64::from(hi)));
            }
        }
        if candidates.is_empty() {
            return id;
        }
        let (feature, lo, hi) = candidates[self.rng.random_range(0..candidates.len())];
        let split = loop {
            let u: f64 = self.rng.random();
            let s = lo + u * (hi - lo);
            if s > lo && s < hi {
                break s;
            }
        };
        let mut mid = 0;
        for j in 0..idx.len() {
            if f64::from(self.data.row(idx[j])[feature as usize]) < split {
                idx.swap(mid, j);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id as usize] = Node::Internal {
            feature,
            split,
            left,
            right,
        };
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<IsolationTree>,
    subsample_size: usize,
    height_limit: usize,
    dimension: usize,
}

/// Fits `config.n_trees` isolation trees. Tree `t` draws its subsample and
/// splits from a stream seeded with `config.seed + t`.
pub fn fit_forest(features: &FeatureMatrix, config: &ForestConfig) -> Result<IsolationForest> {
    let n = features.n_patches();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if config.n_trees == 0 || config.max_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_trees = {}, max_samples = {}",
            config.n_trees, config.max_samples
        )));
    }
    let psi = config.max_samples.min(n);
    let height_limit = (psi as f64).log2().ceil() as usize;
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            let mut idx = sample(&mut rng, n, psi).into_vec();
            let mut builder = TreeBuilder {
                data: features,
                height_limit,
                rng,
                nodes: Vec::new(),
            };
            builder.build(&mut idx, 0);
            IsolationTree { nodes: builder.nodes }
        })
        .collect();
    Ok(IsolationForest {
        trees,
        subsample_size: psi,
        height_limit,
        dimension: features.dimension(),
    })
}

impl IsolationForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn height_limit(&self) -> usize {
        self.height_limit
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(IsolationTree::depth).max().unwrap_or(0)
    }

    /// Whether every tree is a lone external node.
    pub fn is_trivial(&self) -> bool {
        self.trees.iter().all(|t| t.nodes.len() == 1)
    }

    fn check_dim(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Mean adjusted path length of `x` over all trees.
    pub fn expected_path_length(&self, x: &[f32]) -> Result<f64> {
        self.check_dim(x)?;
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        Ok(total / self.trees.len() as f64)
    }

    /// Anomaly score `2^(−E[h(x)] / c(ψ))` in (0, 1]; higher is more outlying.
    pub fn anomaly_score(&self, x: &[f32]) -> Result<f64> {
        let h = self.expected_path_length(x)?;
        Ok(2f64.powf(-h / average_path_length(self.subsample_size)))
    }

    /// Scores every row of `features`.
    pub fn score_all(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        features
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|x| self.anomaly_score(x))
            .collect()
    }
}
