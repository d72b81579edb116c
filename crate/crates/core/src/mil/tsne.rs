//! Exact-gradient T-SNE into two dimensions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 15.0,
            iterations: 500,
            early_exaggeration: 4.0,
            exaggeration_iterations: 100,
            learning_rate: 100.0,
        }
    }
}

const MOMENTUM_SWITCH: usize = 250;
const MIN_GAIN: f64 = 0.01;

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Conditional affinities of one row, with the Gaussian precision found by
/// bisection so the row entropy matches `ln(perplexity)`.
fn row_affinities(dist: &[f64], i: usize, perplexity: f64, out: &mut [f64]) {
    let target = perplexity.ln();
    let (mut beta, mut lo, mut hi) = (1.0f64, f64::NEG_INFINITY, f64::INFINITY);
    // shift by the nearest neighbour distance so exp() never underflows to all zeros
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    for _ in 0..100 {
        let mut sum = 0.0;
        let mut weighted = 0.0;
        for (j, &d) in dist.iter().enumerate() {
            out[j] = if j == i { 0.0 } else { (-(d - dmin) * beta).exp() };
            sum += out[j];
            weighted += (d - dmin) * out[j];
        }
        let entropy = sum.ln() + beta * weighted / sum;
        for p in out.iter_mut() {
            *p /= sum;
        }
        let diff = entropy - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = if lo.is_finite() { 0.5 * (beta + lo) } else { beta / 2.0 };
        }
    }
}

/// Embeds `x` (n rows) into n × 2. Deterministic given `seed`.
pub fn embed_tsne(x: &[Vec<f64>], seed: u64, config: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    let n = x.len();
    if n < 4 {
        return Err(Error::TooFewSamples { needed: 4, got: n });
    }
    if !(config.perplexity > 0.0 && config.perplexity < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {} must lie in (0, {n})",
            config.perplexity
        )));
    }
    let dist = squared_distances(x);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        row_affinities(&dist[i * n..(i + 1) * n], i, config.perplexity, &mut p[i * n..(i + 1) * n]);
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            p[i * n + j] = s;
            p[j * n + i] = s;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut step = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![[0.0; 2]; n];

    for it in 0..config.iterations {
        let exaggeration = if it < config.exaggeration_iterations {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if it < MOMENTUM_SWITCH { 0.5 } else { 0.8 };
        let mut zsum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let q = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = q;
                num[j * n + i] = q;
                zsum += 2.0 * q;
            }
        }
        for i in 0..n {
            let mut g = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let m = (exaggeration * p[i * n + j] - q / zsum) * q;
                g[0] += m * (y[i][0] - y[j][0]);
                g[1] += m * (y[i][1] - y[j][1]);
            }
            grad[i] = [4.0 * g[0], 4.0 * g[1]];
        }
        for i in 0..n {
            for k in 0..2 {
                let same_sign = (grad[i][k] > 0.0) == (step[i][k] > 0.0);
                gains[i][k] = if same_sign {
                    (gains[i][k] * 0.8).max(MIN_GAIN)
                } else {
                    gains[i][k] + 0.2
                };
                step[i][k] = momentum * step[i][k] - config.learning_rate * gains[i][k] * grad[i][k];
                y[i][k] += step[i][k];
            }
        }
        let mean = y.iter().fold([0.0; 2], |m, r| [m[0] + r[0], m[1] + r[1]]);
        let mean = [mean[0] / n as f64, mean[1] / n as f64];
        for r in &mut y {
            r[0] -= mean[0];
            r[1] -= mean[1];
        }
    }
    Ok(y)
}
