//! CART random forest with Gini splits, bootstrap sampling and √d feature
//! candidates per split. A tree votes positive when its leaf's (bootstrap
//! weighted) positive fraction exceeds one half; the forest probability is
//! the fraction of trees voting positive.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        positive: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn vote(&self, x: &[f64]) -> bool {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { positive } => return *positive,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, *left as usize).max(go(nodes, *right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dimension: usize,
    trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    max_features: usize,
    max_depth: usize,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
    features: Vec<usize>,
    scratch: Vec<(f64, bool, u32)>,
}

impl Builder<'_> {
    /// `samples` are (index, bootstrap count) pairs.
    fn grow(&mut self, samples: &mut [(usize, u32)], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let (pos, total) = samples.iter().fold((0u64, 0u64), |(p, t), &(i, w)| {
            (p + if self.y[i] { u64::from(w) } else { 0 }, t + u64::from(w))
        });
        let leaf = Node::Leaf {
            positive: 2 * pos > total,
        };
        if pos == 0 || pos == total || depth >= self.max_depth || samples.len() < 2 {
            self.nodes.push(leaf);
            return id;
        }
        match self.best_split(samples, pos, total) {
            None => {
                self.nodes.push(leaf);
                id
            }
            Some((feature, threshold)) => {
                self.nodes.push(Node::Split {
                    feature: feature as u32,
                    threshold,
                    left: 0,
                    right: 0,
                });
                let mut mid = 0;
                for k in 0..samples.len() {
                    if self.x[samples[k].0][feature] <= threshold {
                        samples.swap(k, mid);
                        mid += 1;
                    }
                }
                let (l, r) = samples.split_at_mut(mid);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                if let Node::Split {
                    left: lref,
                    right: rref,
                    ..
                } = &mut self.nodes[id as usize]
                {
                    *lref = left;
                    *rref = right;
                }
                id
            }
        }
    }

    /// Draws features in random order, skipping ones constant on this node,
    /// until `max_features` informative ones have been evaluated.
    fn best_split(&mut self, samples: &[(usize, u32)], pos: u64, total: u64) -> Option<(usize, f64)> {
        self.features.shuffle(&mut self.rng);
        let mut evaluated = 0;
        let mut best: Option<(f64, usize, f64)> = None;
        let parent_neg = total - pos;
        for fi in 0..self.features.len() {
            if evaluated == self.max_features {
                break;
            }
            let f = self.features[fi];
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&(i, w)| (self.x[i][f], self.y[i], w)));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[self.scratch.len() - 1].0 {
                continue;
            }
            evaluated += 1;
            let (mut lp, mut lt) = (0u64, 0u64);
            for k in 0..self.scratch.len() - 1 {
                let (v, label, w) = self.scratch[k];
                lt += u64::from(w);
                if label {
                    lp += u64::from(w);
                }
                let next = self.scratch[k + 1].0;
                if next == v {
                    continue;
                }
                let rp = pos - lp;
                let ln = lt - lp;
                let rn = parent_neg - ln;
                // weighted child Gini times total, minimised
                let impurity = gini_mass(lp, ln) + gini_mass(rp, rn);
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let mut threshold = 0.5 * (v + next);
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// n · Gini(n) for a node with `p` positive and `q` negative weight.
fn gini_mass(p: u64, q: u64) -> f64 {
    let n = (p + q) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p, q) = (p as f64, q as f64);
    n - (p * p + q * q) / n
}

impl RandomForest {
    /// Fits on rows `x` with labels `y` (true = positive). Tree `t` draws from
    /// a stream seeded with `seed + t`.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if x.len() != y.len() {
            return Err(Error::Misaligned(format!("{} rows vs {} labels", x.len(), y.len())));
        }
        if params.n_trees == 0 {
            return Err(Error::InvalidParameter("forest needs at least one tree".into()));
        }
        let dimension = x[0].len();
        if let Some(bad) = x.iter().find(|r| r.len() != dimension) {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                actual: bad.len(),
            });
        }
        let max_features = ((dimension as f64).sqrt().floor() as usize).max(1);
        let n = x.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                let mut samples: Vec<(usize, u32)> = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(i, &c)| (i, c))
                    .collect();
                let mut b = Builder {
                    x,
                    y,
                    max_features,
                    max_depth: params.max_depth,
                    nodes: Vec::new(),
                    rng,
                    features: (0..dimension).collect(),
                    scratch: Vec::with_capacity(samples.len()),
                };
                b.grow(&mut samples, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(Self { dimension, trees })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }

    /// Number of trees voting positive.
    pub fn votes(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: x.len(),
            });
        }
        Ok(self.trees.iter().filter(|t| t.vote(x)).count())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(self.votes(x)? as f64 / self.trees.len() as f64)
    }
}
