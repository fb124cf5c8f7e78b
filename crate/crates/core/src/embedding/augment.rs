use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure, Result};
use crate::rng::substream;

/// Standard deviation of the additive noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseStd {
    /// Multiple of the embedding's own standard deviation.
    Relative(f64),
    Absolute(f64),
}

impl Default for NoiseStd {
    fn default() -> Self {
        NoiseStd::Relative(0.05)
    }
}

fn std_dev(e: &[f32]) -> f64 {
    let n = e.len() as f64;
    let mean = e.iter().map(|&v| v as f64).sum::<f64>() / n;
    (e.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// With probability `flip_prob` negates the whole vector, then adds i.i.d.
/// zero-mean Gaussian noise. Fully determined by `seed`.
pub fn augment_basic(e: &[f32], flip_prob: f64, noise: NoiseStd, seed: u64) -> Result<Vec<f32>> {
    ensure((0.0..=1.0).contains(&flip_prob), || format!("flip probability {flip_prob} outside [0, 1]"))?;
    let std = match noise {
        NoiseStd::Relative(r) => r * std_dev(e),
        NoiseStd::Absolute(s) => s,
    };
    ensure(std.is_finite() && std >= 0.0, || format!("noise std {std} must be non-negative"))?;
    let mut rng = substream(seed, "augment.basic");
    let sign = if rng.random::<f64>() < flip_prob { -1.0f32 } else { 1.0 };
    let mut out: Vec<f32> = e.iter().map(|&v| sign * v).collect();
    if std > 0.0 {
        let dist = Normal::new(0.0, std).expect("validated std");
        for v in out.iter_mut() {
            *v += dist.sample(&mut rng) as f32;
        }
    }
    Ok(out)
}

/// `(start, len)` of the masked span: `len` uniform in
/// `[ceil(0.1 D), floor(0.2 D)]`, start uniform over all placements.
pub fn mask_span(d: usize, seed: u64) -> Result<(usize, usize)> {
    ensure(d >= 10, || format!("masking needs at least 10 dimensions, got {d}"))?;
    let lo = d.div_ceil(10);
    let hi = d / 5;
    let mut rng = substream(seed, "augment.masking");
    let len = rng.random_range(lo..=hi);
    let start = rng.random_range(0..=d - len);
    Ok((start, len))
}

/// Zeroes one contiguous span chosen by [`mask_span`].
pub fn augment_masking(e: &[f32], seed: u64) -> Result<Vec<f32>> {
    let (start, len) = mask_span(e.len(), seed)?;
    let mut out = e.to_vec();
    out[start..start + len].iter_mut().for_each(|v| *v = 0.0);
    Ok(out)
}
