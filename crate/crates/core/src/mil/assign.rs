use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest};
use crate::error::{Error, Result};

/// Outcome of splitting one positive box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSplit {
    pub embedding: Vec<[f64; 2]>,
    /// Cluster id per box instance, 1 or 2.
    pub assignment: Vec<u8>,
    pub positive_cluster: u8,
    pub degenerate: bool,
}

fn centroid(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut c = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, b) in c.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    c.iter_mut().for_each(|a| *a /= n);
    c
}

fn mean_distance(rows: &[&Vec<f64>], to: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(to).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum::<f64>()
        / rows.len() as f64
}

/// Picks which of the two clusters in a positive box holds the tumor.
///
/// A temporary forest learns cluster 1 (+1) against cluster 2 (−1) and
/// votes on every negative vector. The negatives look like whichever
/// cluster wins the majority, so the other cluster is positive. On an exact
/// tie the cluster farther (on average) from the negative centroid wins.
pub fn assign_positive_cluster(
    assignment: &[u8],
    rows: &[Vec<f64>],
    negatives: &[Vec<f64>],
    params: &ForestParams,
    seed: u64,
) -> Result<u8> {
    if negatives.is_empty() {
        return Err(Error::EmptyNegativeSet);
    }
    if assignment.len() != rows.len() {
        return Err(Error::Misaligned(format!(
            "{} assignments vs {} rows",
            assignment.len(),
            rows.len()
        )));
    }
    if !assignment.contains(&1) || !assignment.contains(&2) {
        return Err(Error::InvalidParameter("both clusters must be nonempty".into()));
    }
    let labels: Vec<bool> = assignment.iter().map(|&a| a == 1).collect();
    let forest = RandomForest::fit(rows, &labels, params, seed)?;
    let mut plus = 0usize;
    for neg in negatives {
        if forest.predict_proba(neg)? > 0.5 {
            plus += 1;
        }
    }
    let minus = negatives.len() - plus;
    Ok(match plus.cmp(&minus) {
        std::cmp::Ordering::Greater => 2,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => {
            let c = centroid(negatives);
            let side = |k: u8| -> Vec<&Vec<f64>> {
                rows.iter().zip(assignment).filter(|(_, &a)| a == k).map(|(r, _)| r).collect()
            };
            if mean_distance(&side(2), &c) > mean_distance(&side(1), &c) {
                2
            } else {
                1
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn blob(rng: &mut ChaCha8Rng, n: usize, centre: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..6).map(|_| centre + rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn fixture() -> (Vec<u8>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let negatives = blob(&mut rng, 30, 0.0);
        let mut rows = blob(&mut rng, 12, 0.0);
        rows.extend(blob(&mut rng, 10, 10.0));
        let assignment = (0..22).map(|i| if i < 12 { 1 } else { 2 }).collect();
        (assignment, rows, negatives)
    }

    #[test]
    fn cluster_unlike_negatives_is_positive() {
        let (a, rows, neg) = fixture();
        assert_eq!(assign_positive_cluster(&a, &rows, &neg, &ForestParams::default(), 1).unwrap(), 2);
    }

    #[test]
    fn relabelling_swaps_answer() {
        let (a, rows, neg) = fixture();
        let swapped: Vec<u8> = a.iter().map(|&k| 3 - k).collect();
        assert_eq!(assign_positive_cluster(&swapped, &rows, &neg, &ForestParams::default(), 1).unwrap(), 1);
    }

    #[test]
    fn empty_negative_set() {
        let (a, rows, _) = fixture();
        assert!(matches!(
            assign_positive_cluster(&a, &rows, &[], &ForestParams::default(), 1),
            Err(Error::EmptyNegativeSet)
        ));
    }

    #[test]
    fn tie_prefers_farther_cluster() {
        // one negative lands in each cluster; negative centroid 5.025 sits
        // 4.975 from cluster 1 on average and 5.075 from cluster 2
        let rows = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1], vec![10.2]];
        let a = vec![1, 1, 2, 2, 2];
        let neg = vec![vec![0.05], vec![10.0]];
        assert_eq!(assign_positive_cluster(&a, &rows, &neg, &ForestParams::default(), 0).unwrap(), 2);
    }
}
