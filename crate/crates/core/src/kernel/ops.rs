//! Forward kernels and their vector-Jacobian products.
//!
//! Tensors whose last axis is a feature axis (`[..., d]`) are treated as a
//! stack of `numel / d` row vectors by the row-wise ops.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex;

use super::fft::FourierPlan;
use super::tensor::{Scalar, Tensor};
use crate::error::{ensure, Result};

/// Variance guard used by every layer norm in the model.
pub const LAYER_NORM_EPS: f64 = 1e-5;

pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    ensure(a.rank() == 2 && b.rank() == 2, || {
        format!("matmul needs rank-2 operands, got {:?} and {:?}", a.shape(), b.shape())
    })?;
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let (k2, n) = (b.shape()[0], b.shape()[1]);
    ensure(k == k2, || format!("matmul inner dims differ: {:?} x {:?}", a.shape(), b.shape()))?;
    Ok(Tensor::from_parts(vec![m, n], matmul_raw(a.data(), b.data(), m, k, n)))
}

/// `[m,k] x [k,n]`, i-k-j loop order.
pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `A^T B` for `A: [k,m]`, `B: [k,n]`.
pub(crate) fn matmul_tn<T: Scalar>(a: &[T], b: &[T], k: usize, m: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `A B^T` for `A: [m,k]`, `B: [n,k]`.
pub(crate) fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] = arow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    out
}

pub(crate) fn transpose_raw<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = x[i * cols + j];
        }
    }
    out
}

/// Row-wise softmax along the last axis, max-shifted.
pub fn softmax_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let c = x.last_dim();
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(c) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Tensor::from_parts(x.shape().to_vec(), out)
}

pub(crate) fn softmax_rows_vjp<T: Scalar>(y: &[T], dy: &[T], c: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); y.len()];
    for ((yr, dyr), dxr) in y.chunks_exact(c).zip(dy.chunks_exact(c)).zip(dx.chunks_exact_mut(c)) {
        let dot: T = yr.iter().zip(dyr).map(|(&a, &b)| a * b).sum();
        for ((o, &yv), &g) in dxr.iter_mut().zip(yr).zip(dyr) {
            *o = yv * (g - dot);
        }
    }
    dx
}

/// Standard normal CDF via `erf`.
fn phi_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * (T::one() + (x * T::lit(FRAC_1_SQRT_2)).erf())
}

fn phi_pdf<T: Scalar>(x: T) -> T {
    T::lit(1.0 / (2.0 * PI).sqrt()) * (-(x * x) * T::lit(0.5)).exp()
}

/// Exact GELU, `x * Phi(x)`.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v * phi_cdf(v))
}

pub(crate) fn gelu_grad<T: Scalar>(x: T) -> T {
    phi_cdf(x) + x * phi_pdf(x)
}

/// ELU with unit alpha.
pub fn elu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { v.exp_m1() })
}

/// Normalized rows plus the per-row inverse standard deviation, kept for the
/// backward pass.
pub(crate) struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn layer_norm_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, LayerNormCache<T>)> {
    let d = x.last_dim();
    ensure(gamma.numel() == d && beta.numel() == d, || {
        format!(
            "layer norm width {d} does not match gamma {:?} / beta {:?}",
            gamma.shape(),
            beta.shape()
        )
    })?;
    let rows = x.rows();
    let mut out = vec![T::zero(); x.numel()];
    let mut xhat = vec![T::zero(); x.numel()];
    let mut inv_std = vec![T::zero(); rows];
    let dn = T::lit(d as f64);
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let mean = row.iter().copied().sum::<T>() / dn;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
        let is = T::one() / (var + eps).sqrt();
        inv_std[r] = is;
        for j in 0..d {
            let h = (row[j] - mean) * is;
            xhat[r * d + j] = h;
            out[r * d + j] = h * gamma.data()[j] + beta.data()[j];
        }
    }
    Ok((Tensor::from_parts(x.shape().to_vec(), out), LayerNormCache { xhat, inv_std }))
}

/// Normalizes each vector along the last axis to zero mean and unit variance
/// (`eps` inside the square root), then applies `gamma`/`beta`.
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<Tensor<T>> {
    layer_norm_forward(x, gamma, beta, eps).map(|(y, _)| y)
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn layer_norm_vjp<T: Scalar>(
    cache: &LayerNormCache<T>,
    gamma: &[T],
    dy: &[T],
    d: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let rows = cache.inv_std.len();
    let mut dx = vec![T::zero(); rows * d];
    let mut dgamma = vec![T::zero(); d];
    let mut dbeta = vec![T::zero(); d];
    let dn = T::lit(d as f64);
    let mut dxhat = vec![T::zero(); d];
    for r in 0..rows {
        let g = &dy[r * d..(r + 1) * d];
        let h = &cache.xhat[r * d..(r + 1) * d];
        for j in 0..d {
            dgamma[j] += g[j] * h[j];
            dbeta[j] += g[j];
            dxhat[j] = g[j] * gamma[j];
        }
        let mean_dxhat = dxhat.iter().copied().sum::<T>() / dn;
        let mean_dxhat_h = dxhat.iter().zip(h).map(|(&a, &b)| a * b).sum::<T>() / dn;
        let is = cache.inv_std[r];
        for j in 0..d {
            dx[r * d + j] = is * (dxhat[j] - mean_dxhat - h[j] * mean_dxhat_h);
        }
    }
    (dx, dgamma, dbeta)
}

/// Output extent of a strided, padded window along one axis:
/// `ceil((len + 2 pad - k + 1) / stride)`.
pub fn conv_out_len(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    ensure(padded >= k, || format!("kernel {k} exceeds padded extent {padded}"))?;
    ensure(stride >= 1, || "stride must be positive".into())?;
    Ok((padded - k) / stride + 1)
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Result<Self> {
        Ok(Self {
            h,
            w,
            k,
            stride,
            pad,
            oh: conv_out_len(h, k, stride, pad)?,
            ow: conv_out_len(w, k, stride, pad)?,
        })
    }

    /// Input coordinate for output position `o` and kernel tap `a`, if inside.
    #[inline]
    fn src(&self, o: usize, a: usize, len: usize) -> Option<usize> {
        let p = (o * self.stride + a) as isize - self.pad as isize;
        (p >= 0 && (p as usize) < len).then_some(p as usize)
    }
}

/// Depthwise 2-D convolution over `x: [h, w, c]` with one `k x k` kernel per
/// channel (`kernels: [k, k, c]`).
pub fn depthwise_conv2d<T: Scalar>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (geom, c) = depthwise_geom(x, kernels, stride, padding)?;
    Ok(Tensor::from_parts(vec![geom.oh, geom.ow, c], depthwise_raw(x.data(), kernels.data(), geom, c)))
}

pub(crate) fn depthwise_geom<T: Scalar>(
    x: &Tensor<T>,
    kernels: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(ConvGeom, usize)> {
    ensure(x.rank() == 3, || format!("depthwise input must be [h,w,c], got {:?}", x.shape()))?;
    ensure(kernels.rank() == 3 && kernels.shape()[0] == kernels.shape()[1], || {
        format!("depthwise kernels must be [k,k,c], got {:?}", kernels.shape())
    })?;
    let k = kernels.shape()[0];
    ensure(k % 2 == 1, || format!("kernel size {k} must be odd"))?;
    let c = x.shape()[2];
    ensure(kernels.shape()[2] == c, || {
        format!("{} depthwise kernels for {c} channels", kernels.shape()[2])
    })?;
    Ok((ConvGeom::new(x.shape()[0], x.shape()[1], k, stride, padding)?, c))
}

pub(crate) fn depthwise_raw<T: Scalar>(x: &[T], kern: &[T], g: ConvGeom, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); g.oh * g.ow * c];
    for oi in 0..g.oh {
        for oj in 0..g.ow {
            let o = &mut out[(oi * g.ow + oj) * c..(oi * g.ow + oj + 1) * c];
            for a in 0..g.k {
                let Some(i) = g.src(oi, a, g.h) else { continue };
                for b in 0..g.k {
                    let Some(j) = g.src(oj, b, g.w) else { continue };
                    let xin = &x[(i * g.w + j) * c..(i * g.w + j + 1) * c];
                    let kk = &kern[(a * g.k + b) * c..(a * g.k + b + 1) * c];
                    for ch in 0..c {
                        o[ch] += xin[ch] * kk[ch];
                    }
                }
            }
        }
    }
    out
}

/// Returns `(dx, dkernels)`.
pub(crate) fn depthwise_vjp<T: Scalar>(
    x: &[T],
    kern: &[T],
    dy: &[T],
    g: ConvGeom,
    c: usize,
) -> (Vec<T>, Vec<T>) {
    let mut dx = vec![T::zero(); x.len()];
    let mut dk = vec![T::zero(); kern.len()];
    for oi in 0..g.oh {
        for oj in 0..g.ow {
            let go = &dy[(oi * g.ow + oj) * c..(oi * g.ow + oj + 1) * c];
            for a in 0..g.k {
                let Some(i) = g.src(oi, a, g.h) else { continue };
                for b in 0..g.k {
                    let Some(j) = g.src(oj, b, g.w) else { continue };
                    let base = (i * g.w + j) * c;
                    let kb = (a * g.k + b) * c;
                    for ch in 0..c {
                        dx[base + ch] += go[ch] * kern[kb + ch];
                        dk[kb + ch] += go[ch] * x[base + ch];
                    }
                }
            }
        }
    }
    (dx, dk)
}

/// Dense 2-D convolution, `x: [h, w, cin]`, `weight: [k, k, cin, cout]`.
pub fn conv2d<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (geom, cin, cout) = conv_geom(x, weight, stride, padding)?;
    Ok(Tensor::from_parts(
        vec![geom.oh, geom.ow, cout],
        conv_raw(x.data(), weight.data(), geom, cin, cout),
    ))
}

pub(crate) fn conv_geom<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(ConvGeom, usize, usize)> {
    ensure(x.rank() == 3, || format!("conv input must be [h,w,c], got {:?}", x.shape()))?;
    ensure(weight.rank() == 4 && weight.shape()[0] == weight.shape()[1], || {
        format!("conv weight must be [k,k,cin,cout], got {:?}", weight.shape())
    })?;
    let cin = x.shape()[2];
    ensure(weight.shape()[2] == cin, || {
        format!("conv weight expects {} input channels, got {cin}", weight.shape()[2])
    })?;
    let geom = ConvGeom::new(x.shape()[0], x.shape()[1], weight.shape()[0], stride, padding)?;
    Ok((geom, cin, weight.shape()[3]))
}

pub(crate) fn conv_raw<T: Scalar>(x: &[T], w: &[T], g: ConvGeom, cin: usize, cout: usize) -> Vec<T> {
    let mut out = vec![T::zero(); g.oh * g.ow * cout];
    for oi in 0..g.oh {
        for oj in 0..g.ow {
            let o = &mut out[(oi * g.ow + oj) * cout..(oi * g.ow + oj + 1) * cout];
            for a in 0..g.k {
                let Some(i) = g.src(oi, a, g.h) else { continue };
                for b in 0..g.k {
                    let Some(j) = g.src(oj, b, g.w) else { continue };
                    let xin = &x[(i * g.w + j) * cin..(i * g.w + j + 1) * cin];
                    let wb = (a * g.k + b) * cin * cout;
                    for (ci, &xv) in xin.iter().enumerate() {
                        let wr = &w[wb + ci * cout..wb + (ci + 1) * cout];
                        for (ov, &wv) in o.iter_mut().zip(wr) {
                            *ov += xv * wv;
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv_vjp<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    g: ConvGeom,
    cin: usize,
    cout: usize,
) -> (Vec<T>, Vec<T>) {
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    for oi in 0..g.oh {
        for oj in 0..g.ow {
            let go = &dy[(oi * g.ow + oj) * cout..(oi * g.ow + oj + 1) * cout];
            for a in 0..g.k {
                let Some(i) = g.src(oi, a, g.h) else { continue };
                for b in 0..g.k {
                    let Some(j) = g.src(oj, b, g.w) else { continue };
                    let xb = (i * g.w + j) * cin;
                    let wb = (a * g.k + b) * cin * cout;
                    for ci in 0..cin {
                        let wr = &w[wb + ci * cout..wb + (ci + 1) * cout];
                        let xv = x[xb + ci];
                        let mut acc = T::zero();
                        for co in 0..cout {
                            acc += go[co] * wr[co];
                            dw[wb + ci * cout + co] += go[co] * xv;
                        }
                        dx[xb + ci] += acc;
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Splits `[H, W, C]` into non-overlapping `p x p` patches, one row per patch
/// in raster order, each row laid out `[pi, pj, c]`.
pub fn patchify<T: Scalar>(image: &Tensor<T>, patch: usize) -> Result<Tensor<T>> {
    ensure(image.rank() == 3, || format!("image must be [H,W,C], got {:?}", image.shape()))?;
    let (h, w, c) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    ensure(patch >= 1 && h % patch == 0 && w % patch == 0, || {
        format!("{h}x{w} image is not divisible into {patch}x{patch} patches")
    })?;
    let (gh, gw) = (h / patch, w / patch);
    let row = patch * patch * c;
    let mut out = vec![T::zero(); gh * gw * row];
    patch_index_map(h, w, c, patch, |src, dst| out[dst] = image.data()[src]);
    Ok(Tensor::from_parts(vec![gh * gw, row], out))
}

/// Calls `f(src, dst)` for every pixel, mapping image offsets to patch-matrix
/// offsets.
pub(crate) fn patch_index_map(
    h: usize,
    w: usize,
    c: usize,
    patch: usize,
    mut f: impl FnMut(usize, usize),
) {
    let gw = w / patch;
    let row = patch * patch * c;
    for i in 0..h {
        for j in 0..w {
            let pidx = (i / patch) * gw + j / patch;
            let within = ((i % patch) * patch + j % patch) * c;
            for ch in 0..c {
                f((i * w + j) * c + ch, pidx * row + within + ch);
            }
        }
    }
}

/// Applies the 2-D transform to every channel of a `[h, w, c, 2]` tensor
/// (last axis = real, imaginary), unnormalized in both directions.
pub(crate) fn fft2_channels<T: Scalar>(x: &[T], h: usize, w: usize, c: usize, inverse: bool) -> Result<Vec<T>> {
    let plan = FourierPlan::<T>::new(h, w)?;
    let mut out = vec![T::zero(); x.len()];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); h * w];
    for ch in 0..c {
        for p in 0..h * w {
            let o = (p * c + ch) * 2;
            buf[p] = Complex::new(x[o], x[o + 1]);
        }
        plan.transform_in_place(&mut buf, inverse);
        for p in 0..h * w {
            let o = (p * c + ch) * 2;
            out[o] = buf[p].re;
            out[o + 1] = buf[p].im;
        }
    }
    Ok(out)
}

/// Mean over all but the last axis: `[..., d] -> [d]`.
pub fn mean_rows<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let d = x.last_dim();
    let rows = x.rows();
    let mut out = vec![T::zero(); d];
    for row in x.data().chunks_exact(d) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let s = T::one() / T::lit(rows as f64);
    out.iter_mut().for_each(|v| *v *= s);
    Tensor::from_parts(vec![d], out)
}

/// Cross-entropy against a smoothed one-hot target, returning the loss and
/// `dL/dlogits = softmax(logits) - q`.
pub(crate) fn smoothed_cross_entropy<T: Scalar>(logits: &[T], target: usize, eps: T) -> Result<(T, Vec<T>)> {
    let k = logits.len();
    ensure(k >= 2, || format!("cross-entropy needs at least 2 classes, got {k}"))?;
    ensure(target < k, || format!("target class {target} out of range for {k} classes"))?;
    ensure(eps >= T::zero() && eps < T::one(), || format!("smoothing {eps} outside [0, 1)"))?;
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let log_z = max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    let off = eps / T::lit((k - 1) as f64);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(k);
    for (i, &z) in logits.iter().enumerate() {
        let q = if i == target { T::one() - eps } else { off };
        let log_p = z - log_z;
        if q > T::zero() {
            loss -= q * log_p;
        }
        grad.push(log_p.exp() - q);
    }
    Ok((loss, grad))
}
