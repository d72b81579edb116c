//! Slides, patch grids and tissue detection.
//!
//! A [`Slide`] keeps its full-resolution image plus a halving pyramid and
//! hands out 256×256 tiles for viewers. Analysis works on a [`PatchGrid`]:
//! the slide cut into non-overlapping 96×96 patches, with trailing pixels
//! that do not fill a whole patch cropped away.

mod grid;
mod otsu;
mod store;
mod synthetic;

pub use grid::{partition_patches, PatchBounds, PatchCoord, PatchGrid};
pub use otsu::{gray_histogram, grayscale, otsu_threshold, tissue_mask, BACKGROUND_MEAN_MIN};
pub use store::{
    read_slide_store, read_truth, tile_path, write_slide_store, write_truth, LevelInfo, SlideManifest,
    TruthSidecar, MANIFEST_FILE, TRUTH_FILE,
};
pub use synthetic::{generate_synthetic_slide, plan_synthetic_slide, SyntheticLayout, SyntheticSpec};

use std::path::PathBuf;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of a square analysis patch, in pixels.
pub const PATCH_PX: u32 = 96;
/// Side of a square viewer tile, in pixels.
pub const TILE_PX: u32 = 256;

/// A tiled slide image with physical scale.
#[derive(Debug, Clone)]
pub struct Slide {
    pub id: String,
    pub microns_per_pixel: f64,
    pub source_path: Option<PathBuf>,
    /// Level 0 is full resolution; each following level halves both axes.
    levels: Vec<RgbImage>,
}

impl Slide {
    /// Builds a slide from a full-resolution image, computing the pyramid.
    pub fn from_image(id: impl Into<String>, image: RgbImage, microns_per_pixel: f64) -> Self {
        let levels = build_pyramid(image);
        Self {
            id: id.into(),
            microns_per_pixel,
            source_path: None,
            levels,
        }
    }

    /// Builds a slide from explicit pyramid levels (as read from a store).
    pub(crate) fn from_levels(
        id: String,
        levels: Vec<RgbImage>,
        microns_per_pixel: f64,
        source_path: Option<PathBuf>,
    ) -> Self {
        Self {
            id,
            microns_per_pixel,
            source_path,
            levels,
        }
    }

    pub fn width_px(&self) -> u32 {
        self.levels[0].width()
    }

    pub fn height_px(&self) -> u32 {
        self.levels[0].height()
    }

    /// Full-resolution image.
    pub fn image(&self) -> &RgbImage {
        &self.levels[0]
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, index: usize) -> Option<&RgbImage> {
        self.levels.get(index)
    }

    /// Number of tiles along (x, y) at `level`.
    pub fn tile_counts(&self, level: usize) -> Option<(u32, u32)> {
        self.levels
            .get(level)
            .map(|img| (img.width().div_ceil(TILE_PX), img.height().div_ceil(TILE_PX)))
    }

    /// Returns tile (x, y) of `level`. Tiles on the right and bottom edges
    /// may be narrower or shorter than [`TILE_PX`].
    pub fn get_tile(&self, level: usize, x: u32, y: u32) -> Result<RgbImage> {
        let out_of_range = || Error::TileOutOfRange { level, x, y };
        let img = self.levels.get(level).ok_or_else(out_of_range)?;
        let (tx, ty) = self.tile_counts(level).ok_or_else(out_of_range)?;
        if x >= tx || y >= ty {
            return Err(out_of_range());
        }
        let x0 = x * TILE_PX;
        let y0 = y * TILE_PX;
        let w = TILE_PX.min(img.width() - x0);
        let h = TILE_PX.min(img.height() - y0);
        Ok(image::imageops::crop_imm(img, x0, y0, w, h).to_image())
    }

    /// Copies patch (row, col) of the grid into a packed RGB buffer.
    pub fn patch_pixels(&self, coord: PatchCoord) -> Vec<u8> {
        let img = &self.levels[0];
        let x0 = coord.col * PATCH_PX;
        let y0 = coord.row * PATCH_PX;
        let stride = img.width() as usize * 3;
        let raw = img.as_raw();
        let mut out = Vec::with_capacity((PATCH_PX * PATCH_PX * 3) as usize);
        for y in y0..y0 + PATCH_PX {
            let start = y as usize * stride + x0 as usize * 3;
            out.extend_from_slice(&raw[start..start + PATCH_PX as usize * 3]);
        }
        out
    }

    /// Patch side length in millimetres.
    pub fn patch_mm(&self) -> f64 {
        f64::from(PATCH_PX) * self.microns_per_pixel / 1000.0
    }
}

fn build_pyramid(base: RgbImage) -> Vec<RgbImage> {
    let mut levels = vec![base];
    loop {
        let last = levels.last().expect("pyramid has a base level");
        if last.width() <= TILE_PX && last.height() <= TILE_PX {
            break;
        }
        let next = downsample(last);
        levels.push(next);
    }
    levels
}

/// Halves both axes with a 2×2 box filter; odd edges average what exists.
fn downsample(src: &RgbImage) -> RgbImage {
    let (w, h) = src.dimensions();
    let nw = w.div_ceil(2);
    let nh = h.div_ceil(2);
    RgbImage::from_fn(nw, nh, |x, y| {
        let mut acc = [0u32; 3];
        let mut n = 0u32;
        for sy in (2 * y)..(2 * y + 2).min(h) {
            for sx in (2 * x)..(2 * x + 2).min(w) {
                let p = src.get_pixel(sx, sy).0;
                for c in 0..3 {
                    acc[c] += u32::from(p[c]);
                }
                n += 1;
            }
        }
        image::Rgb(acc.map(|a| ((a + n / 2) / n) as u8))
    })
}

/// Ground truth painted by the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rows: u32,
    pub cols: u32,
    /// Row-major, `rows * cols` entries.
    pub tumor_mask: Vec<bool>,
    pub lesion_extents_mm: Vec<f64>,
}

impl GroundTruth {
    pub fn is_tumor(&self, coord: PatchCoord) -> bool {
        self.tumor_mask[(coord.row * self.cols + coord.col) as usize]
    }

    pub fn tumor_count(&self) -> usize {
        self.tumor_mask.iter().filter(|&&t| t).count()
    }

    /// Whether any patch inside `bounds` is tumor.
    pub fn intersects(&self, bounds: &PatchBounds) -> bool {
        bounds.coords().any(|c| self.is_tumor(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> RgbImage {
        RgbImage::from_fn(w, h, |x, y| {
            image::Rgb([(x % 251) as u8, (y % 241) as u8, ((x * 7 + y * 3) % 256) as u8])
        })
    }

    #[test]
    fn pyramid_halves_until_single_tile() {
        let slide = Slide::from_image("s", gradient(1000, 600), 0.5);
        let dims: Vec<_> = (0..slide.level_count())
            .map(|l| slide.level(l).unwrap().dimensions())
            .collect();
        assert_eq!(dims, vec![(1000, 600), (500, 300), (250, 150)]);
    }

    #[test]
    fn top_left_tile() {
        let img = gradient(600, 300);
        let slide = Slide::from_image("s", img.clone(), 0.5);
        let tile = slide.get_tile(0, 0, 0).unwrap();
        assert_eq!(tile.dimensions(), (256, 256));
        assert_eq!(tile.get_pixel(10, 20), img.get_pixel(10, 20));
    }

    #[test]
    fn edge_tiles_are_smaller() {
        let slide = Slide::from_image("s", gradient(600, 300), 0.5);
        assert_eq!(slide.tile_counts(0), Some((3, 2)));
        assert_eq!(slide.get_tile(0, 2, 1).unwrap().dimensions(), (88, 44));
    }

    #[test]
    fn out_of_range_tiles() {
        let slide = Slide::from_image("s", gradient(600, 300), 0.5);
        let depth = slide.level_count();
        assert!(matches!(
            slide.get_tile(depth, 0, 0),
            Err(Error::TileOutOfRange { .. })
        ));
        assert!(slide.get_tile(0, 3, 0).is_err());
        assert!(slide.get_tile(0, 0, 2).is_err());
    }

    #[test]
    fn stitched_tiles_reproduce_level0() {
        let img = gradient(700, 530);
        let slide = Slide::from_image("s", img.clone(), 0.5);
        let (tx, ty) = slide.tile_counts(0).unwrap();
        let mut out = RgbImage::new(700, 530);
        for y in 0..ty {
            for x in 0..tx {
                let tile = slide.get_tile(0, x, y).unwrap();
                image::imageops::replace(&mut out, &tile, i64::from(x * TILE_PX), i64::from(y * TILE_PX));
            }
        }
        assert_eq!(out.as_raw(), img.as_raw());
    }

    #[test]
    fn patch_pixels_match_image() {
        let img = gradient(300, 200);
        let slide = Slide::from_image("s", img.clone(), 0.5);
        let px = slide.patch_pixels(PatchCoord { row: 1, col: 2 });
        assert_eq!(px.len(), 96 * 96 * 3);
        let p = img.get_pixel(2 * 96 + 5, 96 + 7).0;
        let off = (7 * 96 + 5) * 3;
        assert_eq!(&px[off..off + 3], &p);
    }
}
