//! DropOut and DropPath on plain tensors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor};
use crate::rng::substream;

/// Elementwise keep mask with survivors scaled by `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], rate: f64) -> Tensor<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    Tensor::from_fn(shape, |_| if rng.random::<f64>() < rate { T::zero() } else { keep })
}

fn check_rate(rate: f64) -> Result<()> {
    ensure((0.0..1.0).contains(&rate), || format!("drop rate {rate} outside [0, 1)"))
}

/// Zeroes entries i.i.d. with probability `rate` and rescales the rest.
/// Identity when `training` is false or `rate` is 0.
pub fn dropout<T: Scalar>(x: &Tensor<T>, rate: f64, seed: u64, training: bool) -> Result<Tensor<T>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask::<T>(&mut substream(seed, "dropout"), x.shape(), rate);
    x.zip_map(&mask, |a, m| a * m)
}

/// Drops the whole residual branch of each sample (leading axis) with
/// probability `rate`, rescaling kept samples. Identity when `training` is
/// false or `rate` is 0.
pub fn droppath<T: Scalar>(branch: &Tensor<T>, rate: f64, seed: u64, training: bool) -> Result<Tensor<T>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(branch.clone());
    }
    let mut rng = substream(seed, "droppath");
    let samples = branch.shape()[0];
    let per = branch.numel() / samples;
    let keep = T::lit(1.0 / (1.0 - rate));
    let mut out = branch.clone();
    for chunk in out.data_mut().chunks_exact_mut(per) {
        let s = if rng.random::<f64>() < rate { T::zero() } else { keep };
        chunk.iter_mut().for_each(|v| *v *= s);
    }
    Ok(out)
}
