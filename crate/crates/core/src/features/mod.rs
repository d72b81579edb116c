//! Per-patch feature vectors.
//!
//! Extractors are strategies behind [`FeatureExtractor`] and are selected by
//! name from an extractor [`Registry`]. Features computed elsewhere (for
//! example by a CNN) enter through the feature file format in [`file`].

mod color_stat;
pub mod file;

pub use color_stat::{color_stat_extractor, ColorStatExtractor, COLOR_STAT_DIM};
pub use file::{read_features, write_features};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::slide::{PatchBounds, PatchCoord, PatchGrid, Slide};

/// Computes one feature vector from the packed RGB pixels of a 96×96 patch.
pub trait FeatureExtractor: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn extract(&self, patch: &[u8]) -> Result<Vec<f64>>;
}

/// Registry holding the built-in extractors.
pub fn default_extractors() -> Registry<dyn FeatureExtractor> {
    let mut reg: Registry<dyn FeatureExtractor> = Registry::new("feature extractor");
    reg.register(ColorStatExtractor::NAME, Arc::new(ColorStatExtractor));
    reg
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub dimension: usize,
    pub extractor_name: String,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            dimension: COLOR_STAT_DIM,
            extractor_name: ColorStatExtractor::NAME.to_string(),
        }
    }
}

/// Row-major per-patch features. Row `i` belongs to `patches[i]`, the
/// `i`-th tissue patch of the grid in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dimension: usize,
    values: Vec<f32>,
    patches: Vec<PatchCoord>,
}

impl FeatureMatrix {
    /// A matrix not yet tied to any grid.
    pub fn new(dimension: usize, values: Vec<f32>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("feature dimension must be ≥ 1".into()));
        }
        if values.len() % dimension != 0 {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                actual: values.len() % dimension,
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite feature value {v}")));
        }
        Ok(Self {
            dimension,
            values,
            patches: Vec::new(),
        })
    }

    pub fn from_rows(dimension: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * dimension);
        for r in rows {
            if r.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(dimension, values)
    }

    /// Ties rows to the tissue patches of `grid`.
    pub fn bind(mut self, grid: &PatchGrid) -> Result<Self> {
        let coords = grid.tissue_coords();
        if coords.len() != self.n_patches() {
            return Err(Error::DimensionMismatch {
                expected: coords.len(),
                actual: self.n_patches(),
            });
        }
        self.patches = coords;
        Ok(self)
    }

    pub fn n_patches(&self) -> usize {
        self.values.len() / self.dimension
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.dimension)
    }

    /// Grid coordinate of each row; empty when unbound.
    pub fn patches(&self) -> &[PatchCoord] {
        &self.patches
    }

    pub fn is_bound(&self) -> bool {
        !self.patches.is_empty() || self.values.is_empty()
    }

    /// Row indices whose patches fall inside `bounds`.
    pub fn rows_in(&self, bounds: &PatchBounds) -> Vec<usize> {
        self.patches
            .iter()
            .enumerate()
            .filter(|(_, c)| bounds.contains(**c))
            .map(|(i, _)| i)
            .collect()
    }
}

/// One row per tissue patch, in row-major grid order.
pub fn extract_features(
    slide: &Slide,
    grid: &PatchGrid,
    spec: &FeatureSpec,
    extractors: &Registry<dyn FeatureExtractor>,
) -> Result<FeatureMatrix> {
    let extractor = extractors.get(&spec.extractor_name)?;
    if extractor.dimension() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            actual: extractor.dimension(),
        });
    }
    let coords = grid.tissue_coords();
    let rows: Vec<Vec<f64>> = coords
        .par_iter()
        .map(|&c| extractor.extract(&slide.patch_pixels(c)))
        .collect::<Result<_>>()?;
    let values = rows.into_iter().flatten().map(|v| v as f32).collect();
    FeatureMatrix::new(spec.dimension, values)?.bind(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slide::{generate_synthetic_slide, partition_patches, tissue_mask, SyntheticSpec};

    fn synthetic(lesions: Vec<f64>) -> (Slide, PatchGrid, crate::slide::GroundTruth) {
        let spec = SyntheticSpec {
            id: "f".into(),
            rows: 16,
            cols: 16,
            lesion_extents_mm: lesions,
            microns_per_pixel: 2.0,
        };
        let (slide, truth) = generate_synthetic_slide(&spec, 11).unwrap();
        let mut grid = partition_patches(&slide).unwrap();
        tissue_mask(&slide, &mut grid);
        (slide, grid, truth)
    }

    #[test]
    fn one_row_per_tissue_patch() {
        let (slide, grid, _) = synthetic(vec![]);
        let m = extract_features(&slide, &grid, &FeatureSpec::default(), &default_extractors()).unwrap();
        assert_eq!(m.n_patches(), grid.tissue_count());
        assert_eq!(m.dimension(), 30);
        assert_eq!(m.patches(), grid.tissue_coords().as_slice());
        let again = extract_features(&slide, &grid, &FeatureSpec::default(), &default_extractors()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn shape_contract_on_a_ten_by_ten_grid() {
        let img = image::RgbImage::from_pixel(960, 960, image::Rgb([250, 250, 250]));
        let slide = Slide::from_image("g", img, 1.0);
        let mut grid = partition_patches(&slide).unwrap();
        for i in 0..40 {
            grid.tissue_mask[i * 2] = true;
        }
        let m = extract_features(&slide, &grid, &FeatureSpec::default(), &default_extractors()).unwrap();
        assert_eq!((m.n_patches(), m.dimension()), (40, 30));
    }

    #[test]
    fn unknown_extractor() {
        let (slide, grid, _) = synthetic(vec![]);
        let spec = FeatureSpec {
            dimension: 1536,
            extractor_name: "inception".into(),
        };
        assert!(matches!(
            extract_features(&slide, &grid, &spec, &default_extractors()),
            Err(Error::UnknownStrategy { .. })
        ));
    }

    #[test]
    fn tumor_rows_separate_from_normal_rows() {
        let (slide, grid, truth) = synthetic(vec![1.2]);
        let m = extract_features(&slide, &grid, &FeatureSpec::default(), &default_extractors()).unwrap();
        let (mut tumor, mut normal) = (Vec::new(), Vec::new());
        for (i, c) in m.patches().iter().enumerate() {
            if truth.is_tumor(*c) {
                tumor.push(m.row(i));
            } else {
                normal.push(m.row(i));
            }
        }
        assert!(tumor.len() >= 10 && normal.len() >= 10);
        let dist = |a: &[f32], b: &[f32]| -> f64 {
            a.iter().zip(b).map(|(x, y)| f64::from(x - y).powi(2)).sum::<f64>().sqrt()
        };
        let mean_between = |xs: &[&[f32]], ys: &[&[f32]]| -> f64 {
            let mut s = 0.0;
            for a in xs {
                for b in ys {
                    s += dist(a, b);
                }
            }
            s / (xs.len() * ys.len()) as f64
        };
        let within = (mean_between(&tumor, &tumor) + mean_between(&normal, &normal)) / 2.0;
        let between = mean_between(&tumor, &normal);
        assert!(between / within > 1.0, "ratio {}", between / within);
    }

    #[test]
    fn bind_checks_row_count() {
        let mut grid = PatchGrid::new(2, 2);
        grid.tissue_mask = vec![true, false, true, true];
        let m = FeatureMatrix::new(2, vec![0.0; 4]).unwrap();
        assert!(matches!(m.bind(&grid), Err(Error::DimensionMismatch { expected: 3, actual: 2 })));
    }
}
