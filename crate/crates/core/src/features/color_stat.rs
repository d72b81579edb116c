use super::FeatureExtractor;
use crate::error::{Error, Result};
use crate::slide::PATCH_PX;

const PATCH_BYTES: usize = (PATCH_PX * PATCH_PX * 3) as usize;
const BINS: usize = 8;

/// 8-bin histogram per channel (24) + channel means (3) + channel std devs (3).
pub const COLOR_STAT_DIM: usize = 3 * BINS + 6;

/// Colour statistics of one patch.
///
/// Layout: R, G, B histograms (8 bins each, normalised to sum to 1), then
/// R, G, B means, then R, G, B population standard deviations.
pub fn color_stat_extractor(patch: &[u8]) -> Result<Vec<f64>> {
    if patch.len() != PATCH_BYTES {
        return Err(Error::WrongPatchShape {
            expected: PATCH_BYTES,
            actual: patch.len(),
        });
    }
    let mut hist = [[0u32; BINS]; 3];
    let mut sum = [0u64; 3];
    let mut sum_sq = [0u64; 3];
    for px in patch.chunks_exact(3) {
        for c in 0..3 {
            let v = px[c];
            hist[c][usize::from(v) / (256 / BINS)] += 1;
            sum[c] += u64::from(v);
            sum_sq[c] += u64::from(v) * u64::from(v);
        }
    }
    let n = (PATCH_PX * PATCH_PX) as f64;
    let mut out = Vec::with_capacity(COLOR_STAT_DIM);
    for h in &hist {
        out.extend(h.iter().map(|&k| f64::from(k) / n));
    }
    let means = sum.map(|s| s as f64 / n);
    out.extend_from_slice(&means);
    for c in 0..3 {
        let var = (sum_sq[c] as f64 / n - means[c] * means[c]).max(0.0);
        out.push(var.sqrt());
    }
    Ok(out)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ColorStatExtractor;

impl ColorStatExtractor {
    pub const NAME: &'static str = "color-stat";
}

impl FeatureExtractor for ColorStatExtractor {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dimension(&self) -> usize {
        COLOR_STAT_DIM
    }

    fn extract(&self, patch: &[u8]) -> Result<Vec<f64>> {
        color_stat_extractor(patch)
    }
}
