//! Layer blocks over a [`Graph`]. Each block reads its weights under a name
//! prefix: `{p}.weight`/`{p}.bias` for linear maps, `{p}.gamma`/`{p}.beta`
//! for layer norms.

use super::graph::{Graph, Mode};
use super::params::{Initializer, ParamStore};
use super::regularize::dropout_mask;
use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor, Var};

/// Std of the truncation-free normal init used for weights and embeddings.
pub const INIT_STD: f64 = 0.02;

pub fn init_linear<T: Scalar>(
    store: &mut ParamStore<T>,
    init: &mut Initializer,
    prefix: &str,
    din: usize,
    dout: usize,
) -> Result<()> {
    store.insert(format!("{prefix}.weight"), init.normal(&[din, dout], INIT_STD))?;
    store.insert(format!("{prefix}.bias"), Tensor::zeros(&[dout]))
}

pub fn init_norm<T: Scalar>(store: &mut ParamStore<T>, prefix: &str, d: usize) -> Result<()> {
    store.insert(format!("{prefix}.gamma"), Tensor::ones(&[d]))?;
    store.insert(format!("{prefix}.beta"), Tensor::zeros(&[d]))
}

/// `fc1: d -> ratio d`, optional per-channel 3x3 depthwise conv with bias,
/// `fc2: ratio d -> d`.
pub fn init_mlp<T: Scalar>(
    store: &mut ParamStore<T>,
    init: &mut Initializer,
    prefix: &str,
    d: usize,
    ratio: usize,
    depthwise: bool,
) -> Result<()> {
    let hidden = ratio * d;
    init_linear(store, init, &format!("{prefix}.fc1"), d, hidden)?;
    if depthwise {
        store.insert(format!("{prefix}.dw.weight"), init.normal(&[3, 3, hidden], (2.0f64 / 9.0).sqrt()))?;
        store.insert(format!("{prefix}.dw.bias"), Tensor::zeros(&[hidden]))?;
    }
    init_linear(store, init, &format!("{prefix}.fc2"), hidden, d)
}

/// Query map `dq -> d`, key/value maps `dkv -> d`, output map `d -> d`.
pub fn init_attention<T: Scalar>(
    store: &mut ParamStore<T>,
    init: &mut Initializer,
    prefix: &str,
    dq: usize,
    dkv: usize,
    d: usize,
) -> Result<()> {
    init_linear(store, init, &format!("{prefix}.q"), dq, d)?;
    init_linear(store, init, &format!("{prefix}.k"), dkv, d)?;
    init_linear(store, init, &format!("{prefix}.v"), dkv, d)?;
    init_linear(store, init, &format!("{prefix}.o"), d, d)
}

/// Pre-norm self-attention block: `norm1`, `attn`, `norm2`, `mlp`.
pub fn init_attention_block<T: Scalar>(
    store: &mut ParamStore<T>,
    init: &mut Initializer,
    prefix: &str,
    d: usize,
    ratio: usize,
) -> Result<()> {
    init_norm(store, &format!("{prefix}.norm1"), d)?;
    init_attention(store, init, &format!("{prefix}.attn"), d, d, d)?;
    init_norm(store, &format!("{prefix}.norm2"), d)?;
    init_mlp(store, init, &format!("{prefix}.mlp"), d, ratio, false)
}

pub fn linear<T: Scalar>(g: &mut Graph<'_, T>, x: Var, prefix: &str) -> Result<Var> {
    let w = g.param(&format!("{prefix}.weight"))?;
    let b = g.param(&format!("{prefix}.bias"))?;
    g.tape.linear(x, w, Some(b))
}

pub fn layer_norm<T: Scalar>(g: &mut Graph<'_, T>, x: Var, prefix: &str) -> Result<Var> {
    let gamma = g.param(&format!("{prefix}.gamma"))?;
    let beta = g.param(&format!("{prefix}.beta"))?;
    g.tape.layer_norm(x, gamma, beta)
}

/// Token MLP: `fc2(GELU(fc1 x))` over the last axis.
pub fn mlp<T: Scalar>(g: &mut Graph<'_, T>, x: Var, prefix: &str) -> Result<Var> {
    let h = linear(g, x, &format!("{prefix}.fc1"))?;
    let h = g.tape.gelu(h);
    linear(g, h, &format!("{prefix}.fc2"))
}

/// Grid MLP on `[h, w, d]`: `fc2(GELU(DWConv(fc1 x)))`.
pub fn conv_mlp<T: Scalar>(g: &mut Graph<'_, T>, x: Var, prefix: &str) -> Result<Var> {
    ensure(g.tape.shape(x).len() == 3, || format!("grid MLP input must be [h,w,d], got {:?}", g.tape.shape(x)))?;
    let h = linear(g, x, &format!("{prefix}.fc1"))?;
    let k = g.param(&format!("{prefix}.dw.weight"))?;
    let b = g.param(&format!("{prefix}.dw.bias"))?;
    let h = g.tape.depthwise_conv2d(h, k, 1, 1)?;
    let h = g.tape.add_bias(h, b)?;
    let h = g.tape.gelu(h);
    linear(g, h, &format!("{prefix}.fc2"))
}

pub struct AttentionOut {
    pub out: Var,
    /// Per-head attention weights `[queries, keys]`, rows summing to one.
    pub probs: Vec<Var>,
}

/// Multi-head scaled dot-product attention with queries from `q_in: [n, dq]`
/// and keys/values from `kv_in: [N, dkv]`, scaled by `1/sqrt(d_head)`.
pub fn multi_head_attention<T: Scalar>(
    g: &mut Graph<'_, T>,
    q_in: Var,
    kv_in: Var,
    prefix: &str,
    heads: usize,
) -> Result<AttentionOut> {
    let q = linear(g, q_in, &format!("{prefix}.q"))?;
    let k = linear(g, kv_in, &format!("{prefix}.k"))?;
    let v = linear(g, kv_in, &format!("{prefix}.v"))?;
    let d = g.tape.shape(q)[1];
    ensure(heads >= 1 && d % heads == 0, || format!("width {d} is not divisible by {heads} heads"))?;
    let dh = d / heads;
    let scale = T::one() / T::lit(dh as f64).sqrt();
    let mut outs = Vec::with_capacity(heads);
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (g.tape.slice_cols(q, h * dh, dh)?, g.tape.slice_cols(k, h * dh, dh)?, g.tape.slice_cols(v, h * dh, dh)?)
        };
        let kt = g.tape.transpose(kh)?;
        let s = g.tape.matmul(qh, kt)?;
        let s = g.tape.scale(s, scale);
        let a = g.tape.softmax_rows(s);
        outs.push(g.tape.matmul(a, vh)?);
        probs.push(a);
    }
    let cat = if heads == 1 { outs[0] } else { g.tape.concat_cols(&outs)? };
    let out = linear(g, cat, &format!("{prefix}.o"))?;
    Ok(AttentionOut { out, probs })
}

/// `x + branch`, with the branch dropped per sample in training mode.
pub fn residual<T: Scalar>(g: &mut Graph<'_, T>, x: Var, branch: Var, mode: &mut Mode<'_>, rate: f64) -> Result<Var> {
    let s = mode.drop_path_scale(rate);
    let branch = if s == 1.0 { branch } else { g.tape.scale(branch, T::lit(s)) };
    g.tape.add(x, branch)
}

/// Inverted dropout in training mode, identity otherwise.
pub fn dropout<T: Scalar>(g: &mut Graph<'_, T>, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
    match mode {
        Mode::Train(reg) if reg.dropout > 0.0 => {
            let mask = dropout_mask::<T>(reg.rng, g.tape.shape(x), reg.dropout);
            let m = g.input(mask);
            g.tape.mul(x, m)
        }
        _ => Ok(x),
    }
}
