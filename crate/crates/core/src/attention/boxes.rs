use serde::{Deserialize, Serialize};

use super::Cluster;
use crate::slide::PatchBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationBox {
    pub bounds: PatchBounds,
    /// Number of member patches of the cluster.
    pub cluster_area: usize,
    /// 1 for the largest cluster, 2 for the runner-up.
    pub rank: u8,
}

/// Bounding boxes of the (up to) two largest clusters by member count;
/// equal counts go to the cluster with the earlier first member.
pub fn recommendation_boxes(clusters: &[Cluster]) -> Vec<RecommendationBox> {
    let mut ranked: Vec<&Cluster> = clusters.iter().filter(|c| !c.is_empty()).collect();
    ranked.sort_by(|a, b| b.len().cmp(&a.len()).then(a.first().cmp(&b.first())));
    ranked
        .into_iter()
        .take(2)
        .enumerate()
        .map(|(i, c)| RecommendationBox {
            bounds: PatchBounds::enclosing(&c.members).expect("cluster is nonempty"),
            cluster_area: c.len(),
            rank: i as u8 + 1,
        })
        .collect()
}
