//! Otsu thresholding and the per-patch tissue mask.

use super::{PatchGrid, Slide, PATCH_PX};
use crate::error::{Error, Result};

/// A uniform image whose gray level is at least this is treated as bare glass.
pub const BACKGROUND_MEAN_MIN: u8 = 250;

/// Gray level of one pixel: channel mean rounded to the nearest integer.
#[inline]
pub fn grayscale(rgb: [u8; 3]) -> u8 {
    let sum = u32::from(rgb[0]) + u32::from(rgb[1]) + u32::from(rgb[2]);
    // sum/3 never lands on .5, so (sum + 1) / 3 is round-to-nearest
    ((sum + 1) / 3) as u8
}

/// 256-bin gray histogram of the patch-covered region of the slide.
pub fn gray_histogram(slide: &Slide, grid: &PatchGrid) -> [u64; 256] {
    let img = slide.image();
    let mut hist = [0u64; 256];
    for y in 0..grid.rows * PATCH_PX {
        for x in 0..grid.cols * PATCH_PX {
            hist[grayscale(img.get_pixel(x, y).0) as usize] += 1;
        }
    }
    hist
}

/// Otsu's threshold over a 256-bin histogram.
///
/// A threshold `t` splits intensities into `[0, t)` and `[t, 255]`. The
/// result maximises the between-class variance; the smallest maximiser wins
/// ties. When every pixel shares one intensity no split exists, and that
/// intensity is returned.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total_sum: u128 = histogram
        .iter()
        .enumerate()
        .map(|(i, &n)| i as u128 * u128::from(n))
        .sum();

    let mut below_n: u64 = 0;
    let mut below_sum: u128 = 0;
    let mut best: Option<(f64, u8)> = None;
    for t in 1..256usize {
        below_n += histogram[t - 1];
        below_sum += (t as u128 - 1) * u128::from(histogram[t - 1]);
        let above_n = total - below_n;
        if below_n == 0 || above_n == 0 {
            continue;
        }
        // between-class variance ∝ (S0·N − S·N0)² / (N0·N1); the numerator is exact
        let d = below_sum as i128 * i128::from(total) - total_sum as i128 * i128::from(below_n);
        let d = d as f64;
        let var = d * d / (below_n as f64 * above_n as f64);
        if best.is_none_or(|(v, _)| var > v) {
            best = Some((var, t as u8));
        }
    }
    Ok(match best {
        Some((_, t)) => t,
        None => histogram.iter().position(|&n| n > 0).expect("nonzero total") as u8,
    })
}

/// Computes the tissue mask and stores it in `grid`.
///
/// A patch is tissue when its mean gray level is below the slide-level Otsu
/// threshold. Uniform slides have no threshold to speak of: a bright one
/// (mean ≥ [`BACKGROUND_MEAN_MIN`]) is all background, anything else is all
/// tissue.
pub fn tissue_mask(slide: &Slide, grid: &mut PatchGrid) -> Vec<bool> {
    let hist = gray_histogram(slide, grid);
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    let mask = if occupied.len() <= 1 {
        let level = occupied.first().copied().unwrap_or(255);
        vec![level < usize::from(BACKGROUND_MEAN_MIN); grid.len()]
    } else {
        let threshold = f64::from(otsu_threshold(&hist).expect("histogram has mass"));
        let img = slide.image();
        let area = f64::from(PATCH_PX * PATCH_PX);
        (0..grid.len())
            .map(|i| {
                let c = grid.coord(i);
                let mut sum = 0u64;
                for y in c.row * PATCH_PX..(c.row + 1) * PATCH_PX {
                    for x in c.col * PATCH_PX..(c.col + 1) * PATCH_PX {
                        sum += u64::from(grayscale(img.get_pixel(x, y).0));
                    }
                }
                (sum as f64 / area) < threshold
            })
            .collect()
    };
    grid.tissue_mask = mask.clone();
    mask
}

#[cfg(test)]
mod tests {
    use image::RgbImage;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::slide::partition_patches;

    /// Exhaustive reference: recompute class statistics from scratch for
    /// every candidate threshold using the textbook w0·w1·(μ0 − μ1)² form.
    fn oracle(hist: &[u64; 256]) -> (u8, Vec<f64>) {
        let total: f64 = hist.iter().map(|&n| n as f64).sum();
        let mut vars = vec![0.0; 256];
        let mut best_t = None;
        let mut best_v = f64::NEG_INFINITY;
        for t in 1..256 {
            let n0: f64 = hist[..t].iter().map(|&n| n as f64).sum();
            let n1: f64 = hist[t..].iter().map(|&n| n as f64).sum();
            if n0 == 0.0 || n1 == 0.0 {
                continue;
            }
            let m0 = hist[..t].iter().enumerate().map(|(i, &n)| i as f64 * n as f64).sum::<f64>() / n0;
            let m1 = hist[t..].iter().enumerate().map(|(i, &n)| (i + t) as f64 * n as f64).sum::<f64>() / n1;
            let v = (n0 / total) * (n1 / total) * (m0 - m1).powi(2);
            vars[t] = v;
            if v > best_v {
                best_v = v;
                best_t = Some(t as u8);
            }
        }
        let t = best_t.unwrap_or_else(|| hist.iter().position(|&n| n > 0).unwrap() as u8);
        (t, vars)
    }

    #[test]
    fn two_spikes() {
        let mut h = [0u64; 256];
        h[50] = 1000;
        h[200] = 1000;
        let t = otsu_threshold(&h).unwrap();
        assert_eq!(t, oracle(&h).0);
        // [0, t) holds the dark spike, [t, 255] the bright one
        assert!(t > 50 && t <= 200);
        assert_eq!(t, 51);
    }

    #[test]
    fn single_class() {
        let mut h = [0u64; 256];
        h[128] = 500;
        assert_eq!(otsu_threshold(&h).unwrap(), 128);
        let (_, vars) = oracle(&h);
        assert!(vars.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_histogram() {
        assert!(matches!(otsu_threshold(&[0; 256]), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn bimodal_gaussian_mixture() {
        let mut h = [0u64; 256];
        for (i, slot) in h.iter_mut().enumerate() {
            let x = i as f64;
            let g = 4000.0 * (-((x - 70.0) / 12.0).powi(2) / 2.0).exp()
                + 2500.0 * (-((x - 180.0) / 20.0).powi(2) / 2.0).exp();
            *slot = g.round() as u64;
        }
        assert_eq!(otsu_threshold(&h).unwrap(), oracle(&h).0);
    }

    #[test]
    fn grayscale_rounds_to_nearest() {
        assert_eq!(grayscale([0, 0, 1]), 0);
        assert_eq!(grayscale([0, 1, 1]), 1);
        assert_eq!(grayscale([255, 255, 255]), 255);
        assert_eq!(grayscale([10, 20, 31]), 20);
    }

    fn histogram_strategy() -> impl Strategy<Value = [u64; 256]> {
        (any::<u64>(), 1usize..256, 0u32..4).prop_map(|(seed, support, shape)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut h = [0u64; 256];
            for _ in 0..support {
                let i = rng.random_range(0..256);
                h[i] += match shape {
                    0 => rng.random_range(1..10),
                    1 => rng.random_range(1..10_000),
                    2 => rng.random_range(1..10_000_000),
                    _ => 1,
                };
            }
            h
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn matches_exhaustive_oracle(h in histogram_strategy()) {
            prop_assert_eq!(otsu_threshold(&h).unwrap(), oracle(&h).0);
        }
    }

    fn uniform(w: u32, h: u32, rgb: [u8; 3]) -> Slide {
        Slide::from_image("u", RgbImage::from_pixel(w, h, image::Rgb(rgb)), 0.5)
    }

    #[test]
    fn all_white_is_background() {
        let s = uniform(480, 480, [255, 255, 255]);
        let mut g = partition_patches(&s).unwrap();
        assert!(tissue_mask(&s, &mut g).iter().all(|&t| !t));
        assert_eq!(g.tissue_count(), 0);
    }

    #[test]
    fn all_pink_is_tissue() {
        let s = uniform(480, 480, [230, 160, 200]);
        let mut g = partition_patches(&s).unwrap();
        assert!(tissue_mask(&s, &mut g).iter().all(|&t| t));
        assert_eq!(g.tissue_count(), 25);
    }

    #[test]
    fn pink_block_on_white() {
        let mut img = RgbImage::from_pixel(960, 960, image::Rgb([248, 247, 249]));
        // patches (2..5, 3..7) painted pink
        for y in 2 * 96..5 * 96 {
            for x in 3 * 96..7 * 96 {
                img.put_pixel(x, y, image::Rgb([225, 150, 195]));
            }
        }
        let s = Slide::from_image("b", img, 0.5);
        let mut g = partition_patches(&s).unwrap();
        let mask = tissue_mask(&s, &mut g);
        for i in 0..g.len() {
            let c = g.coord(i);
            let painted = (2..5).contains(&c.row) && (3..7).contains(&c.col);
            assert_eq!(mask[i], painted, "patch {c:?}");
        }
    }
}
