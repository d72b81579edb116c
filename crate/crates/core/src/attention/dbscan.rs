//! DBSCAN on patch-grid coordinates.
//!
//! Points are the patches whose attention reaches the cutoff; distance is
//! Euclidean on (row, col). A point's neighbourhood includes the point
//! itself. Clusters are discovered in row-major order of their seed core
//! point, and a border point joins the first cluster that reaches it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::slide::PatchCoord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub min_samples: usize,
    /// Neighbourhood radius in patch cells.
    pub epsilon: f64,
    /// Patches with attention ≥ this take part in clustering.
    pub attention_cutoff: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            min_samples: 10,
            epsilon: 3.0,
            attention_cutoff: 0.5,
        }
    }
}

/// One cluster, members sorted row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<PatchCoord>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Row-major-first member.
    pub fn first(&self) -> PatchCoord {
        self.members[0]
    }
}

/// Clusters the patches in `coords` whose attention reaches the cutoff.
pub fn cluster_attention(coords: &[PatchCoord], attention: &[f64], config: &ClusterConfig) -> Vec<Cluster> {
    let points: Vec<PatchCoord> = coords
        .iter()
        .zip(attention)
        .filter(|(_, &a)| a >= config.attention_cutoff)
        .map(|(&c, _)| c)
        .collect();
    cluster_points(&points, config.epsilon, config.min_samples)
}

/// Plain DBSCAN over distinct grid points. Output clusters are sorted by
/// their first member.
pub fn cluster_points(points: &[PatchCoord], epsilon: f64, min_samples: usize) -> Vec<Cluster> {
    let mut order: Vec<PatchCoord> = points.to_vec();
    order.sort_unstable();
    order.dedup();
    if order.is_empty() || epsilon <= 0.0 {
        return Vec::new();
    }
    let index: HashMap<PatchCoord, usize> = order.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let reach = epsilon.floor() as i64;
    let eps_sq = epsilon * epsilon;
    let offsets: Vec<(i64, i64)> = (-reach..=reach)
        .flat_map(|dr| (-reach..=reach).map(move |dc| (dr, dc)))
        .filter(|&(dr, dc)| ((dr * dr + dc * dc) as f64) <= eps_sq)
        .collect();
    let neighbours = |c: PatchCoord| -> Vec<usize> {
        offsets
            .iter()
            .filter_map(|&(dr, dc)| {
                let r = i64::from(c.row) + dr;
                let cl = i64::from(c.col) + dc;
                if r < 0 || cl < 0 {
                    return None;
                }
                index.get(&PatchCoord::new(r as u32, cl as u32)).copied()
            })
            .collect()
    };

    const UNSEEN: usize = usize::MAX;
    let mut label = vec![UNSEEN; order.len()];
    let mut is_core = vec![false; order.len()];
    let mut n_clusters = 0;
    for i in 0..order.len() {
        if label[i] != UNSEEN {
            continue;
        }
        let nb = neighbours(order[i]);
        if nb.len() < min_samples {
            continue;
        }
        is_core[i] = true;
        let id = n_clusters;
        n_clusters += 1;
        label[i] = id;
        let mut stack: Vec<usize> = nb;
        while let Some(j) = stack.pop() {
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = id;
            let nb_j = neighbours(order[j]);
            if nb_j.len() >= min_samples {
                is_core[j] = true;
                stack.extend(nb_j.into_iter().filter(|&k| label[k] == UNSEEN));
            }
        }
    }

    let mut clusters: Vec<Vec<PatchCoord>> = vec![Vec::new(); n_clusters];
    for (i, &l) in label.iter().enumerate() {
        if l != UNSEEN {
            clusters[l].push(order[i]);
        }
    }
    let mut out: Vec<Cluster> = clusters.into_iter().map(|members| Cluster { members }).collect();
    out.sort_by_key(Cluster::first);
    out
}
