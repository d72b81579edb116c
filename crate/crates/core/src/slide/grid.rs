use serde::{Deserialize, Serialize};

use super::{Slide, PATCH_PX};
use crate::error::{Error, Result};

/// Position of a patch in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PatchCoord {
    pub row: u32,
    pub col: u32,
}

impl PatchCoord {
    pub fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

/// Inclusive rectangle of patches: rows `r0..=r1`, columns `c0..=c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchBounds {
    pub r0: u32,
    pub c0: u32,
    pub r1: u32,
    pub c1: u32,
}

impl PatchBounds {
    pub fn new(r0: u32, c0: u32, r1: u32, c1: u32) -> Self {
        Self { r0, c0, r1, c1 }
    }

    /// Smallest rectangle enclosing every coordinate, or `None` if empty.
    pub fn enclosing<'a>(coords: impl IntoIterator<Item = &'a PatchCoord>) -> Option<Self> {
        coords.into_iter().fold(None, |acc, c| {
            Some(match acc {
                None => Self::new(c.row, c.col, c.row, c.col),
                Some(b) => Self::new(
                    b.r0.min(c.row),
                    b.c0.min(c.col),
                    b.r1.max(c.row),
                    b.c1.max(c.col),
                ),
            })
        })
    }

    pub fn contains(&self, c: PatchCoord) -> bool {
        (self.r0..=self.r1).contains(&c.row) && (self.c0..=self.c1).contains(&c.col)
    }

    pub fn height(&self) -> u32 {
        self.r1 - self.r0 + 1
    }

    pub fn width(&self) -> u32 {
        self.c1 - self.c0 + 1
    }

    pub fn area(&self) -> u32 {
        self.height() * self.width()
    }

    pub fn is_ordered(&self) -> bool {
        self.r0 <= self.r1 && self.c0 <= self.c1
    }

    /// Row-major iteration over all covered coordinates.
    pub fn coords(&self) -> impl Iterator<Item = PatchCoord> + '_ {
        (self.r0..=self.r1).flat_map(move |r| (self.c0..=self.c1).map(move |c| PatchCoord::new(r, c)))
    }
}

impl std::fmt::Display for PatchBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[r{}..=r{}, c{}..=c{}]", self.r0, self.r1, self.c0, self.c1)
    }
}

/// A slide partitioned into non-overlapping square patches anchored at (0, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: u32,
    pub cols: u32,
    pub patch_px: u32,
    /// Row-major; `true` marks tissue. All `false` until a mask is computed.
    pub tissue_mask: Vec<bool>,
}

impl PatchGrid {
    pub fn new(rows: u32, cols: u32) -> Self {
        Self {
            rows,
            cols,
            patch_px: PATCH_PX,
            tissue_mask: vec![false; (rows * cols) as usize],
        }
    }

    #[inline]
    pub fn index(&self, c: PatchCoord) -> usize {
        (c.row * self.cols + c.col) as usize
    }

    pub fn coord(&self, index: usize) -> PatchCoord {
        let i = index as u32;
        PatchCoord::new(i / self.cols, i % self.cols)
    }

    pub fn len(&self) -> usize {
        (self.rows * self.cols) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_tissue(&self, c: PatchCoord) -> bool {
        self.tissue_mask[self.index(c)]
    }

    /// Tissue patches in row-major order.
    pub fn tissue_coords(&self) -> Vec<PatchCoord> {
        self.tissue_mask
            .iter()
            .enumerate()
            .filter(|(_, &t)| t)
            .map(|(i, _)| self.coord(i))
            .collect()
    }

    pub fn tissue_count(&self) -> usize {
        self.tissue_mask.iter().filter(|&&t| t).count()
    }

    /// Checks that `bounds` is well-formed and inside the grid.
    pub fn check_bounds(&self, bounds: &PatchBounds) -> Result<()> {
        if !bounds.is_ordered() || bounds.r1 >= self.rows || bounds.c1 >= self.cols {
            return Err(Error::InvalidBounds(bounds.to_string()));
        }
        Ok(())
    }
}

/// Cuts `slide` into whole 96×96 patches; remainder pixels are cropped.
pub fn partition_patches(slide: &Slide) -> Result<PatchGrid> {
    let (w, h) = (slide.width_px(), slide.height_px());
    if w < PATCH_PX || h < PATCH_PX {
        return Err(Error::DimensionTooSmall {
            width: w,
            height: h,
            min: PATCH_PX,
        });
    }
    Ok(PatchGrid::new(h / PATCH_PX, w / PATCH_PX))
}
