#![allow(dead_code)]

use std::path::PathBuf;

use impetus_core::mil::{LabelKind, LabelSource};
use impetus_core::slide::{PatchBounds, PatchCoord, SyntheticSpec};
use impetus_service::cohort::write_cohort;
use impetus_service::session::SlideState;
use impetus_service::LabelRequest;

pub const TUMOR: &str = "tumor";
pub const CLEAN: &str = "clean";
pub const SMALL: &str = "small";

/// Three 20 × 20 slides: a 1.4 mm lesion, no lesion, a 0.6 mm lesion.
pub fn small_cohort() -> (tempfile::TempDir, Vec<PathBuf>) {
    let tmp = tempfile::tempdir().unwrap();
    let spec = |id: &str, lesions: Vec<f64>| SyntheticSpec {
        id: id.into(),
        rows: 20,
        cols: 20,
        lesion_extents_mm: lesions,
        microns_per_pixel: 2.0,
    };
    let specs = [spec(TUMOR, vec![1.4]), spec(CLEAN, vec![]), spec(SMALL, vec![0.6])];
    let dirs = write_cohort(&specs, &tmp.path().join("slides"), 7).unwrap();
    (tmp, dirs)
}

/// Smallest box around the slide's tumor, grown by `margin` and clipped.
pub fn tumor_box(s: &SlideState, margin: u32) -> PatchBounds {
    let truth = s.truth.as_ref().unwrap();
    let tumor: Vec<PatchCoord> = s.features.patches().iter().copied().filter(|c| truth.is_tumor(*c)).collect();
    let b = PatchBounds::enclosing(&tumor).unwrap();
    PatchBounds::new(
        b.r0.saturating_sub(margin),
        b.c0.saturating_sub(margin),
        (b.r1 + margin).min(s.grid.rows - 1),
        (b.c1 + margin).min(s.grid.cols - 1),
    )
}

pub fn whole_slide(s: &SlideState) -> PatchBounds {
    PatchBounds::new(0, 0, s.grid.rows - 1, s.grid.cols - 1)
}

pub fn label(slide_id: &str, bounds: PatchBounds, label: LabelKind) -> LabelRequest {
    LabelRequest {
        slide_id: slide_id.into(),
        bounds,
        label,
        source: LabelSource::Marquee,
        timestamp: Some(0),
    }
}
