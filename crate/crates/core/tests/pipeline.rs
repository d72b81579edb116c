//! One synthetic slide through outliers, boxes and MIL training.

use impetus_core::anomaly::{fit_forest, outlier_mask, ForestConfig, OutlierPolicy};
use impetus_core::attention::{attention_map, cluster_attention, recommendation_boxes, ClusterConfig, SoftOr};
use impetus_core::features::{default_extractors, extract_features, FeatureMatrix, FeatureSpec};
use impetus_core::mil::{predict_map, train_mil_rf, BoxInstances, MilConfig, PositiveOutcome, TrainingPools};
use impetus_core::slide::{generate_synthetic_slide, partition_patches, tissue_mask, GroundTruth, PatchBounds, PatchGrid, SyntheticSpec};

struct Prepared {
    grid: PatchGrid,
    features: FeatureMatrix,
    truth: GroundTruth,
}

fn prepare(extents: Vec<f64>, seed: u64) -> Prepared {
    let spec = SyntheticSpec {
        id: "s".into(),
        rows: 40,
        cols: 40,
        lesion_extents_mm: extents,
        microns_per_pixel: 2.0,
    };
    let (slide, truth) = generate_synthetic_slide(&spec, seed).unwrap();
    let mut grid = partition_patches(&slide).unwrap();
    tissue_mask(&slide, &mut grid);
    let features = extract_features(&slide, &grid, &FeatureSpec::default(), &default_extractors()).unwrap();
    Prepared { grid, features, truth }
}

/// Pairwise count: P(score of a tumor patch > score of a normal one), ties half.
fn auc_by_pairs(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn tumor_bounds(p: &Prepared) -> PatchBounds {
    let tumor: Vec<_> = p.grid.tissue_coords().into_iter().filter(|c| p.truth.is_tumor(*c)).collect();
    PatchBounds::enclosing(&tumor).unwrap()
}

/// A 6×6 all-tissue, tumor-free window.
fn normal_window(p: &Prepared) -> PatchBounds {
    for r in 0..p.grid.rows - 5 {
        for c in 0..p.grid.cols - 5 {
            let b = PatchBounds::new(r, c, r + 5, c + 5);
            if b.coords().all(|x| p.grid.is_tissue(x) && !p.truth.is_tumor(x)) {
                return b;
            }
        }
    }
    panic!("no normal window");
}

#[test]
fn outliers_find_a_small_lesion() {
    let p = prepare(vec![0.8], 11);
    let forest = fit_forest(&p.features, &ForestConfig { seed: 2, ..Default::default() }).unwrap();
    let scores = forest.score_all(&p.features).unwrap();
    let outliers = outlier_mask(&scores, OutlierPolicy::default()).unwrap();
    let attention = attention_map(&outliers, None, 1, &SoftOr).unwrap();
    let clusters = cluster_attention(p.features.patches(), &attention, &ClusterConfig::default());
    let boxes = recommendation_boxes(&clusters);
    assert!(!boxes.is_empty() && boxes.len() <= 2);
    assert!(boxes.iter().any(|b| p.truth.intersects(&b.bounds)));
}

#[test]
fn one_box_each_gives_a_good_classifier() {
    let p = prepare(vec![3.5], 12);
    let cfg = MilConfig::default();
    let mut pools = TrainingPools::new();
    let neg = BoxInstances::from_matrix("s", &p.features, &normal_window(&p)).unwrap();
    pools.ingest_negative_box(neg, &cfg).unwrap();
    let t = tumor_bounds(&p);
    let wide = PatchBounds::new(t.r0.saturating_sub(2), t.c0.saturating_sub(2), t.r1 + 2, t.c1 + 2);
    let pos = BoxInstances::from_matrix("s", &p.features, &wide).unwrap();
    let n_pos_box = pos.len();
    let outcome = pools.ingest_positive_box(pos, &cfg, 5).unwrap();
    let PositiveOutcome::Ingested { added, discarded, split } = outcome else {
        panic!("not ingested");
    };
    assert!(split.is_some());
    assert_eq!(added + discarded, n_pos_box);
    let purity = pools.positive().iter().filter(|e| p.truth.is_tumor(e.patch)).count() as f64 / added as f64;
    assert!(purity >= 0.9, "purity {purity}");
    assert_eq!(pools.total(), 36 + n_pos_box);

    let model = train_mil_rf(&pools, &cfg.forest, 1, 8).unwrap();
    let probs = predict_map(&model, &p.features).unwrap();
    let labels: Vec<bool> = p.features.patches().iter().map(|c| p.truth.is_tumor(*c)).collect();
    let auc = auc_by_pairs(&probs, &labels);
    assert!(auc >= 0.95, "auc {auc}");
    assert!(probs.iter().all(|&x| (0.0..=1.0).contains(&x) && (x * 100.0).fract() == 0.0));

    let again = predict_map(&train_mil_rf(&pools, &cfg.forest, 1, 8).unwrap(), &p.features).unwrap();
    assert_eq!(probs, again);
}
