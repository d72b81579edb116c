//! Isolation-forest path lengths against an exact expectation.
//!
//! For a handful of points every tree uses all of them, so the expected
//! depth of a point follows by recursion: pick each usable feature with equal
//! probability, then each gap between consecutive distinct values with
//! probability proportional to its width.

use impetus_core::anomaly::{average_path_length, fit_forest, ForestConfig};
use impetus_core::features::FeatureMatrix;

fn expected_depth(points: &[Vec<f32>], members: &[usize], x: usize, depth: usize, limit: usize) -> f64 {
    if members.len() <= 1 || depth >= limit {
        return depth as f64 + average_path_length(members.len());
    }
    let dim = points[0].len();
    let usable: Vec<usize> = (0..dim)
        .filter(|&f| {
            let vals = members.iter().map(|&i| points[i][f]);
            vals.clone().fold(f32::INFINITY, f32::min) < vals.fold(f32::NEG_INFINITY, f32::max)
        })
        .collect();
    if usable.is_empty() {
        return depth as f64 + average_path_length(members.len());
    }
    let mut total = 0.0;
    for &f in &usable {
        let mut vals: Vec<f64> = members.iter().map(|&i| f64::from(points[i][f])).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let range = vals[vals.len() - 1] - vals[0];
        let xv = f64::from(points[x][f]);
        for w in vals.windows(2) {
            let p = (w[1] - w[0]) / range;
            let side: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| (f64::from(points[i][f]) <= w[0]) == (xv <= w[0]))
                .collect();
            total += p * expected_depth(points, &side, x, depth + 1, limit) / usable.len() as f64;
        }
    }
    total
}

fn check(points: Vec<Vec<f32>>, seed: u64) {
    let n = points.len();
    let dim = points[0].len();
    let limit = (n as f64).log2().ceil() as usize;
    let m = FeatureMatrix::from_rows(dim, &points).unwrap();
    let forest = fit_forest(
        &m,
        &ForestConfig {
            n_trees: 10_000,
            max_samples: 256,
            seed,
        },
    )
    .unwrap();
    assert_eq!(forest.height_limit(), limit);
    let all: Vec<usize> = (0..n).collect();
    for (i, p) in points.iter().enumerate() {
        let exact = expected_depth(&points, &all, i, 0, limit);
        let empirical = forest.expected_path_length(p).unwrap();
        let rel = (empirical - exact).abs() / exact;
        assert!(rel < 0.02, "point {i}: empirical {empirical} vs exact {exact}");
    }
}

#[test]
fn one_dimensional_points() {
    check(vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]], 1);
}

#[test]
fn eight_points_in_two_dimensions() {
    check(
        vec![
            vec![0.0, 0.0],
            vec![0.5, 0.2],
            vec![0.3, 0.9],
            vec![1.0, 1.0],
            vec![0.8, 0.1],
            vec![0.2, 0.6],
            vec![4.0, 5.0],
            vec![0.6, 0.6],
        ],
        7,
    );
}

#[test]
fn duplicates_and_a_constant_feature() {
    check(
        vec![vec![1.0, 3.0], vec![1.0, 3.0], vec![2.0, 3.0], vec![7.0, 3.0], vec![2.5, 3.0]],
        3,
    );
}

#[test]
fn planted_point_is_isolated_fastest() {
    let mut pts = vec![vec![0.0f32]; 99];
    pts.push(vec![10.0]);
    let m = FeatureMatrix::from_rows(1, &pts).unwrap();
    let forest = fit_forest(&m, &ForestConfig { n_trees: 200, max_samples: 256, seed: 5 }).unwrap();
    let planted = forest.expected_path_length(&[10.0]).unwrap();
    let cluster = forest.expected_path_length(&[0.0]).unwrap();
    assert!(planted < cluster);
    assert_eq!(planted, 1.0);
}
