//! On-disk slide stores.
//!
//! ```text
//! <dir>/manifest.json      {id, width_px, height_px, microns_per_pixel, levels}
//! <dir>/<level>/<x>_<y>.png
//! <dir>/truth.json         optional ground-truth sidecar
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, Slide, TILE_PX};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub index: usize,
    pub tiles_x: u32,
    pub tiles_y: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideManifest {
    pub id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub microns_per_pixel: f64,
    pub levels: Vec<LevelInfo>,
}

impl SlideManifest {
    pub fn of(slide: &Slide) -> Self {
        Self {
            id: slide.id.clone(),
            width_px: slide.width_px(),
            height_px: slide.height_px(),
            microns_per_pixel: slide.microns_per_pixel,
            levels: (0..slide.level_count())
                .map(|index| {
                    let (tiles_x, tiles_y) = slide.tile_counts(index).expect("level exists");
                    LevelInfo {
                        index,
                        tiles_x,
                        tiles_y,
                    }
                })
                .collect(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Path of tile (x, y) at `level` inside a store.
pub fn tile_path(dir: &Path, level: usize, x: u32, y: u32) -> PathBuf {
    dir.join(level.to_string()).join(format!("{x}_{y}.png"))
}

pub fn write_slide_store(slide: &Slide, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let manifest = SlideManifest::of(slide);
    for level in &manifest.levels {
        fs::create_dir_all(dir.join(level.index.to_string()))?;
        for y in 0..level.tiles_y {
            for x in 0..level.tiles_x {
                slide
                    .get_tile(level.index, x, y)?
                    .save_with_format(tile_path(dir, level.index, x, y), image::ImageFormat::Png)?;
            }
        }
    }
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_slide_store(dir: &Path) -> Result<Slide> {
    let manifest = SlideManifest::read(dir)?;
    let malformed = |reason: String| Error::MalformedStore {
        path: dir.to_path_buf(),
        reason,
    };
    if manifest.levels.is_empty() {
        return Err(malformed("manifest lists no levels".into()));
    }
    if !(manifest.microns_per_pixel.is_finite() && manifest.microns_per_pixel > 0.0) {
        return Err(malformed("microns_per_pixel must be positive".into()));
    }
    let (mut w, mut h) = (manifest.width_px, manifest.height_px);
    let mut levels = Vec::with_capacity(manifest.levels.len());
    for (i, info) in manifest.levels.iter().enumerate() {
        if info.index != i {
            return Err(malformed(format!("level {i} has index {}", info.index)));
        }
        if info.tiles_x != w.div_ceil(TILE_PX) || info.tiles_y != h.div_ceil(TILE_PX) {
            return Err(malformed(format!("level {i} tile counts do not match {w}x{h}")));
        }
        let mut img = RgbImage::new(w, h);
        for y in 0..info.tiles_y {
            for x in 0..info.tiles_x {
                let tile = image::open(tile_path(dir, i, x, y))?.to_rgb8();
                let expect = (TILE_PX.min(w - x * TILE_PX), TILE_PX.min(h - y * TILE_PX));
                if tile.dimensions() != expect {
                    return Err(malformed(format!(
                        "tile {i}/{x}_{y} is {:?}, expected {expect:?}",
                        tile.dimensions()
                    )));
                }
                image::imageops::replace(&mut img, &tile, i64::from(x * TILE_PX), i64::from(y * TILE_PX));
            }
        }
        levels.push(img);
        w = w.div_ceil(2);
        h = h.div_ceil(2);
    }
    Ok(Slide::from_levels(
        manifest.id,
        levels,
        manifest.microns_per_pixel,
        Some(dir.to_path_buf()),
    ))
}

/// Ground truth as stored next to a slide; the mask is run-length encoded
/// as `[value, count]` pairs in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub rows: u32,
    pub cols: u32,
    pub tumor_mask: Vec<(bool, u64)>,
    pub lesion_extents_mm: Vec<f64>,
}

impl From<&GroundTruth> for TruthSidecar {
    fn from(t: &GroundTruth) -> Self {
        let mut runs: Vec<(bool, u64)> = Vec::new();
        for &v in &t.tumor_mask {
            match runs.last_mut() {
                Some((last, n)) if *last == v => *n += 1,
                _ => runs.push((v, 1)),
            }
        }
        Self {
            rows: t.rows,
            cols: t.cols,
            tumor_mask: runs,
            lesion_extents_mm: t.lesion_extents_mm.clone(),
        }
    }
}

impl TryFrom<TruthSidecar> for GroundTruth {
    type Error = Error;

    fn try_from(s: TruthSidecar) -> Result<Self> {
        let mask: Vec<bool> = s
            .tumor_mask
            .iter()
            .flat_map(|&(v, n)| std::iter::repeat_n(v, n as usize))
            .collect();
        let expected = (s.rows * s.cols) as usize;
        if mask.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: mask.len(),
            });
        }
        Ok(GroundTruth {
            rows: s.rows,
            cols: s.cols,
            tumor_mask: mask,
            lesion_extents_mm: s.lesion_extents_mm,
        })
    }
}

pub fn write_truth(truth: &GroundTruth, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let sidecar = TruthSidecar::from(truth);
    fs::write(dir.join(TRUTH_FILE), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

pub fn read_truth(dir: &Path) -> Result<GroundTruth> {
    let text = fs::read_to_string(dir.join(TRUTH_FILE))?;
    let sidecar: TruthSidecar = serde_json::from_str(&text)?;
    sidecar.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_round_trip() {
        let img = RgbImage::from_fn(700, 300, |x, y| image::Rgb([x as u8, y as u8, (x ^ y) as u8]));
        let slide = Slide::from_image("rt", img, 0.5);
        let dir = tempfile::tempdir().unwrap();
        write_slide_store(&slide, dir.path()).unwrap();
        let manifest = SlideManifest::read(dir.path()).unwrap();
        assert_eq!(manifest.levels[0], LevelInfo { index: 0, tiles_x: 3, tiles_y: 2 });
        let back = read_slide_store(dir.path()).unwrap();
        assert_eq!(back.id, "rt");
        assert_eq!(back.level_count(), slide.level_count());
        for l in 0..slide.level_count() {
            assert_eq!(back.level(l).unwrap().as_raw(), slide.level(l).unwrap().as_raw());
        }
    }

    #[test]
    fn missing_tile_is_an_error() {
        let slide = Slide::from_image("m", RgbImage::new(300, 300), 0.5);
        let dir = tempfile::tempdir().unwrap();
        write_slide_store(&slide, dir.path()).unwrap();
        fs::remove_file(tile_path(dir.path(), 0, 1, 1)).unwrap();
        assert!(read_slide_store(dir.path()).is_err());
    }

    #[test]
    fn truth_rle() {
        let truth = GroundTruth {
            rows: 2,
            cols: 3,
            tumor_mask: vec![false, false, true, true, false, false],
            lesion_extents_mm: vec![0.5],
        };
        let sidecar = TruthSidecar::from(&truth);
        assert_eq!(sidecar.tumor_mask, vec![(false, 2), (true, 2), (false, 2)]);
        let json = serde_json::to_string(&sidecar).unwrap();
        assert!(json.contains("[[false,2],[true,2],[false,2]]"), "{json}");
        let dir = tempfile::tempdir().unwrap();
        write_truth(&truth, dir.path()).unwrap();
        assert_eq!(read_truth(dir.path()).unwrap(), truth);
    }

    #[test]
    fn truth_length_checked() {
        let bad = TruthSidecar {
            rows: 2,
            cols: 2,
            tumor_mask: vec![(false, 3)],
            lesion_extents_mm: vec![],
        };
        assert!(GroundTruth::try_from(bad).is_err());
    }
}
