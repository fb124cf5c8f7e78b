use super::config::BackboneConfig;
use super::model::forward;
use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor};
use crate::nn::{Graph, Mode, ParamStore};

/// Bilinear resampling of `[h, w]` to `[oh, ow]` with half-pixel centres and
/// edge clamping.
pub fn bilinear_resize<T: Scalar>(src: &Tensor<T>, oh: usize, ow: usize) -> Result<Tensor<T>> {
    ensure(src.rank() == 2, || format!("bilinear source must be [h,w], got {:?}", src.shape()))?;
    let (h, w) = (src.shape()[0], src.shape()[1]);
    let coord = |o: usize, out: usize, len: usize| -> (usize, usize, T) {
        let p = ((o as f64 + 0.5) * len as f64 / out as f64 - 0.5).clamp(0.0, (len - 1) as f64);
        let lo = p.floor() as usize;
        let hi = (lo + 1).min(len - 1);
        (lo, hi, T::lit(p - lo as f64))
    };
    let mut out = Vec::with_capacity(oh * ow);
    for i in 0..oh {
        let (r0, r1, fy) = coord(i, oh, h);
        for j in 0..ow {
            let (c0, c1, fx) = coord(j, ow, w);
            let top = src.at(&[r0, c0]) * (T::one() - fx) + src.at(&[r0, c1]) * fx;
            let bottom = src.at(&[r1, c0]) * (T::one() - fx) + src.at(&[r1, c1]) * fx;
            out.push(top * (T::one() - fy) + bottom * fy);
        }
    }
    Tensor::new(vec![oh, ow], out)
}

/// Maps values linearly onto `[0, 1]`; a constant input maps to all zeros.
pub fn min_max_normalize<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let lo = x.data().iter().copied().fold(T::infinity(), T::min);
    let hi = x.data().iter().copied().fold(T::neg_infinity(), T::max);
    let range = hi - lo;
    if !(range > T::zero()) {
        return Tensor::zeros(x.shape());
    }
    x.map(|v| (v - lo) / range)
}

/// Heat map of one head of the last attention layer of the last stage:
/// weights averaged over queries, laid out on the stage grid, bilinearly
/// resized to the input resolution and min-max normalized.
pub fn attention_map<T: Scalar>(
    cfg: &BackboneConfig,
    params: &ParamStore<T>,
    image: &Tensor<T>,
    head: usize,
) -> Result<Tensor<T>> {
    let last = cfg.stages.last().expect("validated config has stages");
    ensure(last.attention_layers > 0, || "last stage has no attention layer".into())?;
    ensure(head < last.heads, || format!("head {head} out of range for {} heads", last.heads))?;
    let mut g = Graph::eval(params);
    let x = g.input(image.clone());
    let out = forward(&mut g, cfg, x, &mut Mode::Eval)?;
    let probs = g.value(out.last_attention[head]);
    let side = cfg.grid(cfg.stages.len() - 1);
    let per_key = crate::kernel::mean_rows(probs).into_reshaped(&[side, side])?;
    let up = bilinear_resize(&per_key, cfg.image_size, cfg.image_size)?;
    Ok(min_max_normalize(&up))
}
