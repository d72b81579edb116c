//! Two-cluster K-Means with seeded k-means++ initialisation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const MAX_ITERATIONS: usize = 300;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSplit {
    /// Cluster id per point, 1 or 2.
    pub assignment: Vec<u8>,
    pub centroids: [[f64; 2]; 2],
    /// Set when a cluster is empty or all points coincide.
    pub degenerate: bool,
}

fn sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn degenerate(n: usize, c: [f64; 2]) -> KMeansSplit {
    KMeansSplit {
        assignment: vec![1; n],
        centroids: [c, c],
        degenerate: true,
    }
}

/// Splits 2-D points into clusters 1 and 2. Ties in distance go to cluster 1.
pub fn split_kmeans(points: &[[f64; 2]], seed: u64) -> KMeansSplit {
    let n = points.len();
    if n < 2 {
        return degenerate(n, points.first().copied().unwrap_or([0.0; 2]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = points[rng.random_range(0..n)];
    let d2: Vec<f64> = points.iter().map(|&p| sq(p, first)).collect();
    let total: f64 = d2.iter().sum();
    if total == 0.0 {
        return degenerate(n, first);
    }
    let mut target = rng.random::<f64>() * total;
    let mut second_idx = n - 1;
    for (i, &d) in d2.iter().enumerate() {
        if d > 0.0 && target < d {
            second_idx = i;
            break;
        }
        target -= d;
    }
    // guard against rounding landing on a zero-distance point
    if d2[second_idx] == 0.0 {
        second_idx = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
    }
    let mut centroids = [first, points[second_idx]];
    let mut assignment = vec![1u8; n];
    for _ in 0..MAX_ITERATIONS {
        for (a, &p) in assignment.iter_mut().zip(points) {
            *a = if sq(p, centroids[1]) < sq(p, centroids[0]) { 2 } else { 1 };
        }
        let mut sums = [[0.0; 2]; 2];
        let mut counts = [0usize; 2];
        for (&a, &p) in assignment.iter().zip(points) {
            let k = usize::from(a - 1);
            sums[k][0] += p[0];
            sums[k][1] += p[1];
            counts[k] += 1;
        }
        if counts.contains(&0) {
            return KMeansSplit {
                assignment,
                centroids,
                degenerate: true,
            };
        }
        let next = [0, 1].map(|k| [sums[k][0] / counts[k] as f64, sums[k][1] / counts[k] as f64]);
        let shift = sq(next[0], centroids[0]).sqrt().max(sq(next[1], centroids[1]).sqrt());
        centroids = next;
        if shift < TOLERANCE {
            break;
        }
    }
    for (a, &p) in assignment.iter_mut().zip(points) {
        *a = if sq(p, centroids[1]) < sq(p, centroids[0]) { 2 } else { 1 };
    }
    let degenerate = !assignment.contains(&1) || !assignment.contains(&2);
    KMeansSplit {
        assignment,
        centroids,
        degenerate,
    }
}
