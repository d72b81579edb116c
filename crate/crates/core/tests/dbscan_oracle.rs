//! DBSCAN against a brute-force reachability oracle, and box tightness.

use std::collections::BTreeSet;

use impetus_core::attention::{cluster_points, recommendation_boxes, Cluster};
use impetus_core::slide::{PatchBounds, PatchCoord};
use proptest::prelude::*;

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    parent[i] = r;
    r
}

/// Cores joined by all-pairs reachability; each border point goes to the
/// cluster of its earliest (row-major) core neighbour's component whose
/// first core comes first.
fn oracle(points: &[PatchCoord], eps: f64, min_samples: usize) -> BTreeSet<BTreeSet<PatchCoord>> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    let n = pts.len();
    let close = |a: PatchCoord, b: PatchCoord| {
        let dr = f64::from(a.row) - f64::from(b.row);
        let dc = f64::from(a.col) - f64::from(b.col);
        dr * dr + dc * dc <= eps * eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| close(pts[i], pts[j])).count() >= min_samples)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && close(pts[i], pts[j]) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // component root is its smallest core index, which is also discovery order
    let mut groups: std::collections::BTreeMap<usize, BTreeSet<PatchCoord>> = Default::default();
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().insert(pts[i]);
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let owner = (0..n)
            .filter(|&j| core[j] && close(pts[i], pts[j]))
            .map(|j| find(&mut parent, j))
            .min();
        if let Some(r) = owner {
            groups.get_mut(&r).unwrap().insert(pts[i]);
        }
    }
    groups.into_values().collect()
}

fn as_sets(clusters: &[Cluster]) -> BTreeSet<BTreeSet<PatchCoord>> {
    clusters.iter().map(|c| c.members.iter().copied().collect()).collect()
}

fn grid_points() -> impl Strategy<Value = Vec<PatchCoord>> {
    (5u32..30, 5u32..30, 0.05f64..0.7, any::<u64>()).prop_map(|(rows, cols, density, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if rng.random::<f64>() < density && pts.len() < 400 {
                    pts.push(PatchCoord::new(r, c));
                }
            }
        }
        pts
    })
}

#[test]
fn fixed_examples_match_oracle() {
    let block: Vec<_> = (0..4).flat_map(|r| (0..3).map(move |c| PatchCoord::new(r, c))).collect();
    assert_eq!(as_sets(&cluster_points(&block, 3.0, 10)), oracle(&block, 3.0, 10));
    assert_eq!(oracle(&block, 3.0, 10).len(), 1);

    let mut blobs: Vec<_> = (0..4).flat_map(|r| (0..5).map(move |c| PatchCoord::new(r, c))).collect();
    blobs.extend((0..4).flat_map(|r| (15..20).map(move |c| PatchCoord::new(r, c))));
    let got = cluster_points(&blobs, 3.0, 10);
    assert_eq!(got.len(), 2);
    assert_eq!(as_sets(&got), oracle(&blobs, 3.0, 10));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn matches_brute_force(pts in grid_points(), min_samples in 2usize..12, eps in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0])) {
        let got = cluster_points(&pts, eps, min_samples);
        prop_assert_eq!(as_sets(&got), oracle(&pts, eps, min_samples));
        let firsts: Vec<PatchCoord> = got.iter().map(Cluster::first).collect();
        let mut sorted = firsts.clone();
        sorted.sort();
        prop_assert_eq!(firsts, sorted);
    }

    #[test]
    fn boxes_are_tight(pts in grid_points()) {
        let clusters = cluster_points(&pts, 3.0, 5);
        for b in recommendation_boxes(&clusters) {
            let c = clusters.iter().find(|c| c.len() == b.cluster_area && PatchBounds::enclosing(&c.members) == Some(b.bounds)).unwrap();
            prop_assert!(c.members.iter().all(|&m| b.bounds.contains(m)));
            prop_assert!(c.members.iter().any(|m| m.row == b.bounds.r0));
            prop_assert!(c.members.iter().any(|m| m.row == b.bounds.r1));
            prop_assert!(c.members.iter().any(|m| m.col == b.bounds.c0));
            prop_assert!(c.members.iter().any(|m| m.col == b.bounds.c1));
            let larger = clusters.iter().filter(|o| o.len() > b.cluster_area).count();
            prop_assert!(larger < usize::from(b.rank));
        }
    }
}
