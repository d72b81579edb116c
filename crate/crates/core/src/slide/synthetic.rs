//! Seeded synthetic slides with known tumor regions.
//!
//! Tissue occupies a patch-aligned ellipse on white glass; lesions are
//! discs of the requested physical diameter, centred on a patch centre and
//! fully inside tissue. A patch counts as tumor when at least half of its
//! pixels are painted tumor, or when it holds a lesion centre.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GroundTruth, PatchCoord, Slide, PATCH_PX};
use crate::error::{Error, Result};
use crate::seed::{hash3, unit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub id: String,
    pub rows: u32,
    pub cols: u32,
    /// Diameter of each planted lesion.
    pub lesion_extents_mm: Vec<f64>,
    pub microns_per_pixel: f64,
}

impl SyntheticSpec {
    pub fn n_lesions(&self) -> usize {
        self.lesion_extents_mm.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Lesion {
    cx: f64,
    cy: f64,
    radius: f64,
}

impl Lesion {
    #[inline]
    fn covers(&self, x: u32, y: u32) -> bool {
        let dx = f64::from(x) + 0.5 - self.cx;
        let dy = f64::from(y) + 0.5 - self.cy;
        dx * dx + dy * dy <= self.radius * self.radius
    }

    /// Distance from the centre to the nearest point of patch `c`.
    fn distance_to_patch(&self, c: PatchCoord) -> f64 {
        square_distance(self.cx, self.cy, c)
    }
}

fn square_distance(px: f64, py: f64, c: PatchCoord) -> f64 {
    let p = f64::from(PATCH_PX);
    let x0 = f64::from(c.col) * p;
    let y0 = f64::from(c.row) * p;
    let dx = (x0 - px).max(0.0).max(px - (x0 + p));
    let dy = (y0 - py).max(0.0).max(py - (y0 + p));
    dx.hypot(dy)
}

/// Everything about a synthetic slide except its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLayout {
    pub spec: SyntheticSpec,
    pub seed: u64,
    /// Row-major tissue patches as painted.
    pub tissue: Vec<bool>,
    lesions: Vec<Lesion>,
    pub truth: GroundTruth,
}

/// Lays out tissue and lesions and derives the ground truth, without
/// rendering any pixels.
pub fn plan_synthetic_slide(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticLayout> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::SpecInfeasible("grid must have at least one patch".into()));
    }
    if !(spec.microns_per_pixel.is_finite() && spec.microns_per_pixel > 0.0) {
        return Err(Error::SpecInfeasible("microns_per_pixel must be positive".into()));
    }
    if let Some(bad) = spec.lesion_extents_mm.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::SpecInfeasible(format!("lesion extent {bad} mm")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (spec.rows, spec.cols);

    // tissue ellipse, in patch units
    let cr = f64::from(rows) * (0.5 + rng.random_range(-0.03..0.03));
    let cc = f64::from(cols) * (0.5 + rng.random_range(-0.03..0.03));
    let ar = f64::from(rows) * rng.random_range(0.40..0.46);
    let ac = f64::from(cols) * rng.random_range(0.40..0.46);
    let tissue: Vec<bool> = (0..rows * cols)
        .map(|i| {
            let (r, c) = (f64::from(i / cols) + 0.5, f64::from(i % cols) + 0.5);
            ((r - cr) / ar).powi(2) + ((c - cc) / ac).powi(2) <= 1.0
        })
        .collect();
    let is_tissue = |r: i64, c: i64| {
        r >= 0 && c >= 0 && r < i64::from(rows) && c < i64::from(cols) && tissue[(r as u32 * cols + c as u32) as usize]
    };

    // non-tissue patches bordering tissue; the nearest obstacle to any
    // interior point is one of these or the grid edge
    let boundary: Vec<PatchCoord> = (0..rows * cols)
        .map(|i| PatchCoord::new(i / cols, i % cols))
        .filter(|c| {
            let (r, cl) = (i64::from(c.row), i64::from(c.col));
            !is_tissue(r, cl)
                && (-1..=1).any(|dr| (-1..=1).any(|dc| is_tissue(r + dr, cl + dc)))
        })
        .collect();
    let p = f64::from(PATCH_PX);
    let (w, h) = (f64::from(cols) * p, f64::from(rows) * p);
    let clearance: Vec<f64> = (0..rows * cols)
        .map(|i| {
            if !tissue[i as usize] {
                return 0.0;
            }
            let c = PatchCoord::new(i / cols, i % cols);
            let (x, y) = ((f64::from(c.col) + 0.5) * p, (f64::from(c.row) + 0.5) * p);
            boundary
                .iter()
                .map(|b| square_distance(x, y, *b))
                .fold(x.min(y).min(w - x).min(h - y), f64::min)
        })
        .collect();

    let mut lesions: Vec<Lesion> = Vec::new();
    for &extent in &spec.lesion_extents_mm {
        let radius = extent * 1000.0 / spec.microns_per_pixel / 2.0;
        let candidates: Vec<usize> = (0..(rows * cols) as usize)
            .filter(|&i| clearance[i] > radius)
            .filter(|&i| {
                let (x, y) = (
                    (f64::from(i as u32 % cols) + 0.5) * p,
                    (f64::from(i as u32 / cols) + 0.5) * p,
                );
                lesions
                    .iter()
                    .all(|l| (l.cx - x).hypot(l.cy - y) >= l.radius + radius + 2.0 * p)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::SpecInfeasible(format!(
                "no room for a {extent} mm lesion in a {rows}x{cols} grid at {} µm/px",
                spec.microns_per_pixel
            )));
        }
        let i = candidates[rng.random_range(0..candidates.len())] as u32;
        lesions.push(Lesion {
            cx: (f64::from(i % cols) + 0.5) * p,
            cy: (f64::from(i / cols) + 0.5) * p,
            radius,
        });
    }

    let mut tumor_mask = vec![false; (rows * cols) as usize];
    for lesion in &lesions {
        let r0 = ((lesion.cy - lesion.radius) / p).floor().max(0.0) as u32;
        let r1 = (((lesion.cy + lesion.radius) / p).floor() as u32).min(rows - 1);
        let c0 = ((lesion.cx - lesion.radius) / p).floor().max(0.0) as u32;
        let c1 = (((lesion.cx + lesion.radius) / p).floor() as u32).min(cols - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let coord = PatchCoord::new(r, c);
                if lesion.distance_to_patch(coord) > lesion.radius {
                    continue;
                }
                let holds_centre = (lesion.cx / p) as u32 == c && (lesion.cy / p) as u32 == r;
                if holds_centre || patch_coverage(lesion, coord) * 2 >= PATCH_PX * PATCH_PX {
                    tumor_mask[(r * cols + c) as usize] = true;
                }
            }
        }
    }

    Ok(SyntheticLayout {
        spec: spec.clone(),
        seed,
        tissue,
        lesions,
        truth: GroundTruth {
            rows,
            cols,
            tumor_mask,
            lesion_extents_mm: spec.lesion_extents_mm.clone(),
        },
    })
}

fn patch_coverage(lesion: &Lesion, c: PatchCoord) -> u32 {
    let (x0, y0) = (c.col * PATCH_PX, c.row * PATCH_PX);
    let mut n = 0;
    for y in y0..y0 + PATCH_PX {
        for x in x0..x0 + PATCH_PX {
            n += u32::from(lesion.covers(x, y));
        }
    }
    n
}

const NUCLEUS_CELL: u32 = 12;

struct Palette {
    base: [f64; 3],
    nucleus: [f64; 3],
    nucleus_rate: f64,
    nucleus_radius: f64,
    noise: f64,
}

const STROMA: Palette = Palette {
    base: [233.0, 163.0, 203.0],
    nucleus: [120.0, 60.0, 150.0],
    nucleus_rate: 0.12,
    nucleus_radius: 2.5,
    noise: 10.0,
};

const TUMOR: Palette = Palette {
    base: [196.0, 118.0, 186.0],
    nucleus: [95.0, 40.0, 135.0],
    nucleus_rate: 0.55,
    nucleus_radius: 3.5,
    noise: 10.0,
};

impl SyntheticLayout {
    /// Paints the slide. Output is a pure function of the layout.
    pub fn render(&self) -> Slide {
        let rows = self.spec.rows;
        let cols = self.spec.cols;
        let (w, h) = (cols * PATCH_PX, rows * PATCH_PX);
        let seed = self.seed;
        let mut raw = vec![0u8; (w * h * 3) as usize];
        raw.par_chunks_mut((w * 3) as usize)
            .enumerate()
            .for_each(|(y, line)| {
                let y = y as u32;
                for x in 0..w {
                    let patch = (y / PATCH_PX) * cols + x / PATCH_PX;
                    let rgb = if !self.tissue[patch as usize] {
                        let n = hash3(seed, u64::from(x), u64::from(y));
                        [0u32, 1, 2].map(|k| 246.0 + (unit(n.rotate_left(k * 21)) - 0.5) * 8.0)
                    } else {
                        let palette = if self.lesions.iter().any(|l| l.covers(x, y)) {
                            &TUMOR
                        } else {
                            &STROMA
                        };
                        paint(palette, seed, x, y)
                    };
                    let o = (x * 3) as usize;
                    for k in 0..3 {
                        line[o + k] = rgb[k].round().clamp(0.0, 255.0) as u8;
                    }
                }
            });
        let img = RgbImage::from_raw(w, h, raw).expect("buffer sized to image");
        Slide::from_image(self.spec.id.clone(), img, self.spec.microns_per_pixel)
    }
}

fn paint(palette: &Palette, seed: u64, x: u32, y: u32) -> [f64; 3] {
    let (cx, cy) = (x / NUCLEUS_CELL, y / NUCLEUS_CELL);
    let cell = hash3(seed ^ 0x6e75_636c, u64::from(cx), u64::from(cy));
    let mut colour = palette.base;
    if unit(cell) < palette.nucleus_rate {
        let margin = palette.nucleus_radius + 0.5;
        let span = f64::from(NUCLEUS_CELL) - 2.0 * margin;
        let nx = f64::from(cx * NUCLEUS_CELL) + margin + unit(cell.rotate_left(17)) * span;
        let ny = f64::from(cy * NUCLEUS_CELL) + margin + unit(cell.rotate_left(37)) * span;
        let (dx, dy) = (f64::from(x) + 0.5 - nx, f64::from(y) + 0.5 - ny);
        if dx * dx + dy * dy <= palette.nucleus_radius * palette.nucleus_radius {
            colour = palette.nucleus;
        }
    }
    let n = hash3(seed, u64::from(x), u64::from(y));
    let shade = (unit(n) - 0.5) * 2.0 * palette.noise;
    [0u32, 1, 2].map(|k| colour[k as usize] + shade + (unit(n.rotate_left(13 + 11 * k)) - 0.5) * 4.0)
}

/// Generates a slide and its ground truth; deterministic in `(spec, seed)`.
pub fn generate_synthetic_slide(spec: &SyntheticSpec, seed: u64) -> Result<(Slide, GroundTruth)> {
    let layout = plan_synthetic_slide(spec, seed)?;
    Ok((layout.render(), layout.truth))
}
