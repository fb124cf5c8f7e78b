//! Wengert-list reverse-mode differentiation.
//!
//! Every op appends a node holding its output value and whatever it needs for
//! the backward pass. [`Tape::backward`] walks the nodes in exact reverse
//! recording order, accumulating adjoints; nodes that no differentiable leaf
//! feeds into are skipped.
//!
//! Complex tensors are real tensors with a trailing axis of 2 (re, im). The
//! adjoint of a complex-linear map `y = A z` under the real-pair convention
//! is `A^H` applied to the incoming `dL/dre + i dL/dim`.

use std::borrow::Cow;

use super::ops::{self, ConvGeom, LayerNormCache};
use super::tensor::{Scalar, Tensor};
use crate::error::{ensure, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, T),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Gelu(Var),
    Elu(Var),
    Exp(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, cache: LayerNormCache<T> },
    DepthwiseConv { x: Var, k: Var, geom: ConvGeom, c: usize },
    Conv { x: Var, w: Var, geom: ConvGeom, cin: usize, cout: usize },
    Patchify { x: Var, patch: usize },
    ToComplex(Var),
    ComplexRe(Var),
    ComplexMul(Var, Var),
    Fft2(Var),
    Ifft2(Var),
    MeanRows(Var),
    Sum(Var),
    CrossEntropy { logits: Var, dlogits: Vec<T> },
}

struct Node<'a, T: Scalar> {
    value: Cow<'a, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// Records a computation for one backward pass. Single-threaded by design;
/// build one tape per training step.
pub struct Tape<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
}

/// Adjoints produced by [`Tape::backward`].
pub struct Grads<T: Scalar> {
    grads: Vec<Option<Tensor<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Grads<T> {
    /// Adjoint of `v`; zero when `v` did not influence the output.
    pub fn get(&self, v: Var) -> Tensor<T> {
        self.grads[v.0].clone().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }

    pub fn take(&mut self, v: Var) -> Tensor<T> {
        self.grads[v.0].take().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value: Cow::Owned(value), op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input owned by the tape.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// A differentiable input borrowed from a parameter store.
    pub fn leaf_ref(&mut self, value: &'a Tensor<T>) -> Var {
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Leaf, needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// A non-differentiable input borrowed from a parameter store.
    pub fn constant_ref(&mut self, value: &'a Tensor<T>) -> Var {
        self.nodes.push(Node { value: Cow::Borrowed(value), op: Op::Leaf, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(y, Op::Mul(a, b), &[a, b]))
    }

    /// Adds `bias: [d]` to every vector along the last axis of `x: [..., d]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let d = xv.last_dim();
        ensure(bv.numel() == d, || format!("bias {:?} for rows of width {d}", bv.shape()))?;
        let mut out = xv.data().to_vec();
        for row in out.chunks_exact_mut(d) {
            for (o, &b) in row.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let y = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.push(y, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let y = self.value(x).scale(s);
        self.push(y, Op::Scale(x, s), &[x])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(y, Op::MatMul(a, b), &[a, b]))
    }

    /// `x: [..., k] @ w: [k, n] + b` with leading axes flattened.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let k = *shape.last().expect("non-empty shape");
        let flat = if shape.len() == 2 { x } else { self.reshape(x, &[shape.iter().product::<usize>() / k, k])? };
        let mut y = self.matmul(flat, w)?;
        if let Some(b) = b {
            y = self.add_bias(y, b)?;
        }
        if shape.len() == 2 {
            return Ok(y);
        }
        let mut out_shape = shape;
        *out_shape.last_mut().expect("non-empty shape") = self.shape(w)[1];
        self.reshape(y, &out_shape)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        ensure(xv.rank() == 2, || format!("transpose needs rank 2, got {:?}", xv.shape()))?;
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let y = Tensor::from_parts(vec![c, r], ops::transpose_raw(xv.data(), r, c));
        Ok(self.push(y, Op::Transpose(x), &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).reshape(shape)?;
        Ok(self.push(y, Op::Reshape(x), &[x]))
    }

    /// Columns `start..start+len` of a `[r, c]` matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        ensure(xv.rank() == 2 && start + len <= xv.shape()[1] && len > 0, || {
            format!("cannot take columns {start}..{} of {:?}", start + len, xv.shape())
        })?;
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let mut out = Vec::with_capacity(r * len);
        for row in xv.data().chunks_exact(c) {
            out.extend_from_slice(&row[start..start + len]);
        }
        let y = Tensor::from_parts(vec![r, len], out);
        Ok(self.push(y, Op::SliceCols { x, start }, &[x]))
    }

    /// Concatenates `[r, c_i]` matrices along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        ensure(!parts.is_empty(), || "concat of zero parts".into())?;
        let r = self.shape(parts[0])[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            ensure(s.len() == 2 && s[0] == r, || format!("concat part {s:?} with {r} rows"))?;
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(r * total);
        for i in 0..r {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let y = Tensor::from_parts(vec![r, total], out);
        Ok(self.push(y, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let y = ops::gelu(self.value(x));
        self.push(y, Op::Gelu(x), &[x])
    }

    pub fn elu(&mut self, x: Var) -> Var {
        let y = ops::elu(self.value(x));
        self.push(y, Op::Elu(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v.exp());
        self.push(y, Op::Exp(x), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let y = ops::softmax_rows(self.value(x));
        self.push(y, Op::SoftmaxRows(x), &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (y, cache) = ops::layer_norm_forward(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            T::lit(ops::LAYER_NORM_EPS),
        )?;
        Ok(self.push(y, Op::LayerNorm { x, gamma, beta, cache }, &[x, gamma, beta]))
    }

    pub fn depthwise_conv2d(&mut self, x: Var, k: Var, stride: usize, pad: usize) -> Result<Var> {
        let (geom, c) = ops::depthwise_geom(self.value(x), self.value(k), stride, pad)?;
        let out = ops::depthwise_raw(self.value(x).data(), self.value(k).data(), geom, c);
        let y = Tensor::from_parts(vec![geom.oh, geom.ow, c], out);
        Ok(self.push(y, Op::DepthwiseConv { x, k, geom, c }, &[x, k]))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let (geom, cin, cout) = ops::conv_geom(self.value(x), self.value(w), stride, pad)?;
        let out = ops::conv_raw(self.value(x).data(), self.value(w).data(), geom, cin, cout);
        let y = Tensor::from_parts(vec![geom.oh, geom.ow, cout], out);
        Ok(self.push(y, Op::Conv { x, w, geom, cin, cout }, &[x, w]))
    }

    pub fn patchify(&mut self, x: Var, patch: usize) -> Result<Var> {
        let y = ops::patchify(self.value(x), patch)?;
        Ok(self.push(y, Op::Patchify { x, patch }, &[x]))
    }

    /// `[...] -> [..., 2]` with zero imaginary part.
    pub fn to_complex(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut shape = xv.shape().to_vec();
        shape.push(2);
        let mut out = vec![T::zero(); xv.numel() * 2];
        for (i, &v) in xv.data().iter().enumerate() {
            out[2 * i] = v;
        }
        let y = Tensor::from_parts(shape, out);
        self.push(y, Op::ToComplex(x), &[x])
    }

    /// Real part of a `[..., 2]` complex tensor.
    pub fn complex_re(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        ensure(xv.last_dim() == 2 && xv.rank() >= 2, || {
            format!("complex tensor must end in an axis of 2, got {:?}", xv.shape())
        })?;
        let shape = xv.shape()[..xv.rank() - 1].to_vec();
        let y = Tensor::from_parts(shape, xv.data().iter().step_by(2).copied().collect());
        Ok(self.push(y, Op::ComplexRe(x), &[x]))
    }

    /// Elementwise complex product of two `[..., 2]` tensors.
    pub fn complex_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        ensure(av.shape() == bv.shape() && av.last_dim() == 2, || {
            format!("complex product of {:?} and {:?}", av.shape(), bv.shape())
        })?;
        let mut out = vec![T::zero(); av.numel()];
        for ((o, x), y) in out.chunks_exact_mut(2).zip(av.data().chunks_exact(2)).zip(bv.data().chunks_exact(2)) {
            o[0] = x[0] * y[0] - x[1] * y[1];
            o[1] = x[0] * y[1] + x[1] * y[0];
        }
        let y = Tensor::from_parts(av.shape().to_vec(), out);
        Ok(self.push(y, Op::ComplexMul(a, b), &[a, b]))
    }

    fn grid_dims(&self, x: Var) -> Result<(usize, usize, usize)> {
        let s = self.shape(x);
        ensure(s.len() == 4 && s[3] == 2, || format!("spectral input must be [h,w,c,2], got {s:?}"))?;
        Ok((s[0], s[1], s[2]))
    }

    /// Unnormalized 2-D DFT over the spatial axes of `[h, w, c, 2]`.
    pub fn fft2(&mut self, x: Var) -> Result<Var> {
        let (h, w, c) = self.grid_dims(x)?;
        let out = ops::fft2_channels(self.value(x).data(), h, w, c, false)?;
        let y = Tensor::from_parts(vec![h, w, c, 2], out);
        Ok(self.push(y, Op::Fft2(x), &[x]))
    }

    /// Inverse 2-D DFT over the spatial axes of `[h, w, c, 2]`, with `1/(hw)`.
    pub fn ifft2(&mut self, x: Var) -> Result<Var> {
        let (h, w, c) = self.grid_dims(x)?;
        let mut out = ops::fft2_channels(self.value(x).data(), h, w, c, true)?;
        let s = T::one() / T::lit((h * w) as f64);
        out.iter_mut().for_each(|v| *v *= s);
        let y = Tensor::from_parts(vec![h, w, c, 2], out);
        Ok(self.push(y, Op::Ifft2(x), &[x]))
    }

    /// `[..., d] -> [d]` mean over every leading position.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let y = ops::mean_rows(self.value(x));
        self.push(y, Op::MeanRows(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).sum());
        self.push(y, Op::Sum(x), &[x])
    }

    /// Cross-entropy of `logits: [K]` against a label-smoothed target with
    /// `1 - eps` on `target` and `eps / (K - 1)` elsewhere.
    pub fn cross_entropy(&mut self, logits: Var, target: usize, eps: T) -> Result<Var> {
        let (loss, dlogits) = ops::smoothed_cross_entropy(self.value(logits).data(), target, eps)?;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, dlogits }, &[logits]))
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, out: Var) -> Result<Grads<T>> {
        ensure(self.value(out).numel() == 1, || {
            format!("backward needs a scalar output, got {:?}", self.shape(out))
        })?;
        let n = out.0 + 1;
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::from_parts(self.shape(out).to_vec(), vec![T::one()]));
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Grads { grads, shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect() })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, data: Vec<T>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => {
                for (a, d) in acc.data_mut().iter_mut().zip(data) {
                    *a += d;
                }
            }
            slot @ None => *slot = Some(Tensor::from_parts(self.shape(v).to_vec(), data)),
        }
    }

    fn propagate(&self, op: &Op<T>, y: &Tensor<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gd.to_vec());
                self.accumulate(grads, *b, gd.to_vec());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, gd.iter().zip(bv).map(|(&g, &b)| g * b).collect());
                self.accumulate(grads, *b, gd.iter().zip(av).map(|(&g, &a)| g * a).collect());
            }
            Op::AddBias(x, b) => {
                let d = self.value(*b).numel();
                let mut db = vec![T::zero(); d];
                for row in gd.chunks_exact(d) {
                    for (o, &v) in db.iter_mut().zip(row) {
                        *o += v;
                    }
                }
                self.accumulate(grads, *x, gd.to_vec());
                self.accumulate(grads, *b, db);
            }
            Op::Scale(x, s) => self.accumulate(grads, *x, gd.iter().map(|&v| v * *s).collect()),
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if self.nodes[a.0].needs_grad {
                    self.accumulate(grads, *a, ops::matmul_nt(gd, bv.data(), m, n, k));
                }
                if self.nodes[b.0].needs_grad {
                    self.accumulate(grads, *b, ops::matmul_tn(av.data(), gd, m, k, n));
                }
            }
            Op::Transpose(x) => {
                let (r, c) = (y.shape()[1], y.shape()[0]);
                self.accumulate(grads, *x, ops::transpose_raw(gd, c, r));
            }
            Op::Reshape(x) => self.accumulate(grads, *x, gd.to_vec()),
            Op::SliceCols { x, start } => {
                let xs = self.shape(*x);
                let (r, c) = (xs[0], xs[1]);
                let len = y.shape()[1];
                let mut dx = vec![T::zero(); r * c];
                for i in 0..r {
                    dx[i * c + start..i * c + start + len].copy_from_slice(&gd[i * len..(i + 1) * len]);
                }
                self.accumulate(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let (r, total) = (y.shape()[0], y.shape()[1]);
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    let mut dp = Vec::with_capacity(r * w);
                    for i in 0..r {
                        dp.extend_from_slice(&gd[i * total + offset..i * total + offset + w]);
                    }
                    self.accumulate(grads, p, dp);
                    offset += w;
                }
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, gd.iter().zip(xv).map(|(&g, &v)| g * ops::gelu_grad(v)).collect());
            }
            Op::Elu(x) => {
                let xv = self.value(*x).data();
                let dx = gd
                    .iter()
                    .zip(xv)
                    .zip(y.data())
                    .map(|((&g, &v), &yv)| if v > T::zero() { g } else { g * (yv + T::one()) })
                    .collect();
                self.accumulate(grads, *x, dx);
            }
            Op::Exp(x) => self.accumulate(grads, *x, gd.iter().zip(y.data()).map(|(&g, &v)| g * v).collect()),
            Op::SoftmaxRows(x) => self.accumulate(grads, *x, ops::softmax_rows_vjp(y.data(), gd, y.last_dim())),
            Op::LayerNorm { x, gamma, beta, cache } => {
                let d = y.last_dim();
                let (dx, dgamma, dbeta) = ops::layer_norm_vjp(cache, self.value(*gamma).data(), gd, d);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *gamma, dgamma);
                self.accumulate(grads, *beta, dbeta);
            }
            Op::DepthwiseConv { x, k, geom, c } => {
                let (dx, dk) = ops::depthwise_vjp(self.value(*x).data(), self.value(*k).data(), gd, *geom, *c);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *k, dk);
            }
            Op::Conv { x, w, geom, cin, cout } => {
                let (dx, dw) = ops::conv_vjp(self.value(*x).data(), self.value(*w).data(), gd, *geom, *cin, *cout);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
            }
            Op::Patchify { x, patch } => {
                let xs = self.shape(*x);
                let mut dx = vec![T::zero(); self.value(*x).numel()];
                ops::patch_index_map(xs[0], xs[1], xs[2], *patch, |src, dst| dx[src] = gd[dst]);
                self.accumulate(grads, *x, dx);
            }
            Op::ToComplex(x) => self.accumulate(grads, *x, gd.iter().step_by(2).copied().collect()),
            Op::ComplexRe(x) => {
                let mut dx = vec![T::zero(); gd.len() * 2];
                for (i, &v) in gd.iter().enumerate() {
                    dx[2 * i] = v;
                }
                self.accumulate(grads, *x, dx);
            }
            Op::ComplexMul(a, b) => {
                // dL/da = g * conj(b), dL/db = g * conj(a)
                let conj_mul = |other: &[T]| -> Vec<T> {
                    let mut out = vec![T::zero(); gd.len()];
                    for ((o, gz), z) in out.chunks_exact_mut(2).zip(gd.chunks_exact(2)).zip(other.chunks_exact(2)) {
                        o[0] = gz[0] * z[0] + gz[1] * z[1];
                        o[1] = gz[1] * z[0] - gz[0] * z[1];
                    }
                    out
                };
                let da = conj_mul(self.value(*b).data());
                let db = conj_mul(self.value(*a).data());
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Fft2(x) => {
                let s = y.shape();
                let dx = ops::fft2_channels(gd, s[0], s[1], s[2], true).expect("shape checked on forward");
                self.accumulate(grads, *x, dx);
            }
            Op::Ifft2(x) => {
                let s = y.shape();
                let mut dx = ops::fft2_channels(gd, s[0], s[1], s[2], false).expect("shape checked on forward");
                let inv = T::one() / T::lit((s[0] * s[1]) as f64);
                dx.iter_mut().for_each(|v| *v *= inv);
                self.accumulate(grads, *x, dx);
            }
            Op::MeanRows(x) => {
                let xv = self.value(*x);
                let d = xv.last_dim();
                let inv = T::one() / T::lit(xv.rows() as f64);
                let mut dx = Vec::with_capacity(xv.numel());
                for _ in 0..xv.rows() {
                    dx.extend(gd.iter().map(|&v| v * inv));
                }
                debug_assert_eq!(dx.len(), xv.rows() * d);
                self.accumulate(grads, *x, dx);
            }
            Op::Sum(x) => {
                let n = self.value(*x).numel();
                self.accumulate(grads, *x, vec![gd[0]; n]);
            }
            Op::CrossEntropy { logits, dlogits } => {
                self.accumulate(grads, *logits, dlogits.iter().map(|&v| v * gd[0]).collect());
            }
        }
    }
}
