//! A standard set of synthetic slides for desk-scale runs.

use std::path::{Path, PathBuf};

use impetus_core::seed::derive_seed;
use impetus_core::slide::{generate_synthetic_slide, write_slide_store, write_truth, SyntheticSpec};

use crate::error::Result;

pub const COHORT_MICRONS_PER_PIXEL: f64 = 2.0;
pub const COHORT_GRID: u32 = 40;

/// Largest lesion diameter (mm) per slide; `None` is tumor-free.
const COHORT_LESIONS: [Option<f64>; 16] = [
    Some(3.6),
    None,
    Some(0.9),
    Some(3.4),
    None,
    Some(1.3),
    Some(0.15),
    Some(3.8),
    None,
    Some(0.6),
    Some(2.6),
    None,
    Some(1.7),
    Some(3.0),
    None,
    Some(0.5),
];

/// Sixteen 40 × 40-patch slides at 2 µm/px: five macro, five micro, one
/// ITC-sized and five tumor-free.
pub fn desk_cohort() -> Vec<SyntheticSpec> {
    COHORT_LESIONS
        .iter()
        .enumerate()
        .map(|(i, lesion)| SyntheticSpec {
            id: format!("slide-{:02}", i + 1),
            rows: COHORT_GRID,
            cols: COHORT_GRID,
            lesion_extents_mm: lesion.iter().copied().collect(),
            microns_per_pixel: COHORT_MICRONS_PER_PIXEL,
        })
        .collect()
}

/// Renders each spec into `root/<id>` as a slide store with its truth file.
pub fn write_cohort(specs: &[SyntheticSpec], root: &Path, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(root)?;
    let mut dirs = Vec::with_capacity(specs.len());
    for spec in specs {
        let dir = root.join(&spec.id);
        let (slide, truth) = generate_synthetic_slide(spec, derive_seed(seed, 0, &spec.id, "synthetic"))?;
        write_slide_store(&slide, &dir)?;
        write_truth(&truth, &dir)?;
        tracing::debug!(slide = %spec.id, tumor = truth.tumor_count(), "slide written");
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Slide-store subdirectories of `root`, sorted by name.
pub fn slide_dirs_in(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(impetus_core::slide::MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}
