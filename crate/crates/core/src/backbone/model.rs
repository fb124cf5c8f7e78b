//! Forward pass and parameter layout.
//!
//! Parameter names:
//! - `patch.{weight,bias}`: `[p*p*c, d1]` patch projection
//! - `stage{s}.pos`: `[h, w, d]` positional encoding added at stage entry
//! - `stage{s}.spectral{j}.{norm1,filter,norm2,mlp}`; the filter is a complex
//!   `[h, w, d, 2]` grid
//! - `stage{s}.attn{j}.{norm1,attn,norm2,mlp}`
//! - `stage{s}.down.{weight,bias}`: 3x3 stride-2 conv to the next width,
//!   absent after the last stage
//! - `head.task{t}.{weight,bias}`: auxiliary pretraining classifiers

use super::config::BackboneConfig;
use crate::error::Result;
use crate::kernel::{Scalar, Tensor, Var};
use crate::nn::blocks::{self, INIT_STD};
use crate::nn::{Graph, Initializer, Mode, ParamStore};
use crate::rng::substream;

pub fn init_params<T: Scalar>(cfg: &BackboneConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut init = Initializer::new(substream(seed, "backbone.init"));
    let mut store = ParamStore::new();
    let r = cfg.mlp_ratio;
    blocks::init_linear(&mut store, &mut init, "patch", cfg.patch_dim(), cfg.stages[0].dim)?;
    for (s, st) in cfg.stages.iter().enumerate() {
        let (g, d) = (cfg.grid(s), st.dim);
        let p = format!("stage{}", s + 1);
        store.insert(format!("{p}.pos"), init.normal(&[g, g, d], INIT_STD))?;
        for j in 0..st.spectral_layers {
            let l = format!("{p}.spectral{}", j + 1);
            blocks::init_norm(&mut store, &format!("{l}.norm1"), d)?;
            store.insert(format!("{l}.filter"), init.normal(&[g, g, d, 2], INIT_STD))?;
            blocks::init_norm(&mut store, &format!("{l}.norm2"), d)?;
            blocks::init_mlp(&mut store, &mut init, &format!("{l}.mlp"), d, r, true)?;
        }
        for j in 0..st.attention_layers {
            blocks::init_attention_block(&mut store, &mut init, &format!("{p}.attn{}", j + 1), d, r)?;
        }
        if let Some(next) = cfg.stages.get(s + 1) {
            let std = (2.0 / (9 * d) as f64).sqrt();
            store.insert(format!("{p}.down.weight"), init.normal(&[3, 3, d, next.dim], std))?;
            store.insert(format!("{p}.down.bias"), Tensor::zeros(&[next.dim]))?;
        }
    }
    Ok(store)
}

/// Adds one `Linear -> ELU` classifier per task under `head.task{t}`.
pub fn init_aux_heads<T: Scalar>(store: &mut ParamStore<T>, dim: usize, classes: &[usize], seed: u64) -> Result<()> {
    let mut init = Initializer::new(substream(seed, "backbone.heads"));
    for (t, &k) in classes.iter().enumerate() {
        blocks::init_linear(store, &mut init, &format!("head.task{t}"), dim, k)?;
    }
    Ok(())
}

pub fn aux_logits<T: Scalar>(g: &mut Graph<'_, T>, embedding: Var, task: usize, mode: &mut Mode<'_>) -> Result<Var> {
    let x = blocks::dropout(g, embedding, mode)?;
    let d = g.tape.shape(x)[0];
    let x = g.tape.reshape(x, &[1, d])?;
    let y = blocks::linear(g, x, &format!("head.task{task}"))?;
    let y = g.tape.elu(y);
    let k = g.tape.shape(y)[1];
    g.tape.reshape(y, &[k])
}

/// Patch projection plus the first stage's positional encoding:
/// `[H, W, C] -> [H/p, W/p, d1]`.
pub fn patch_embed<T: Scalar>(g: &mut Graph<'_, T>, cfg: &BackboneConfig, image: Var) -> Result<Var> {
    let (s, c) = (cfg.image_size, cfg.in_channels);
    g.tape.value(image).expect_shape(&[s, s, c])?;
    let rows = g.tape.patchify(image, cfg.patch_size)?;
    let tokens = blocks::linear(g, rows, "patch")?;
    let side = cfg.grid(0);
    let grid = g.tape.reshape(tokens, &[side, side, cfg.stages[0].dim])?;
    let pos = g.param("stage1.pos")?;
    g.tape.add(grid, pos)
}

/// `Re(IFFT2(K * FFT2(z)))` over the spatial axes of `z: [h, w, d]`.
pub fn spectral_gate<T: Scalar>(g: &mut Graph<'_, T>, z: Var, filter: Var) -> Result<Var> {
    let zc = g.tape.to_complex(z);
    let f = g.tape.fft2(zc)?;
    let gated = g.tape.complex_mul(f, filter)?;
    let back = g.tape.ifft2(gated)?;
    g.tape.complex_re(back)
}

/// `y = x + gate(LN(x))`, then `y + MLP(LN(y))` with the depthwise MLP.
pub fn spectral_layer_forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    prefix: &str,
    mode: &mut Mode<'_>,
    drop_rate: f64,
) -> Result<Var> {
    let z = blocks::layer_norm(g, x, &format!("{prefix}.norm1"))?;
    let filter = g.param(&format!("{prefix}.filter"))?;
    let gate = spectral_gate(g, z, filter)?;
    let y = blocks::residual(g, x, gate, mode, drop_rate)?;
    let z = blocks::layer_norm(g, y, &format!("{prefix}.norm2"))?;
    let m = blocks::conv_mlp(g, z, &format!("{prefix}.mlp"))?;
    blocks::residual(g, y, m, mode, drop_rate)
}

/// Pre-norm attention block on tokens `[N, d]`; also returns the per-head
/// attention weights.
pub fn self_attention_forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    x: Var,
    prefix: &str,
    heads: usize,
    mode: &mut Mode<'_>,
    drop_rate: f64,
) -> Result<(Var, Vec<Var>)> {
    let z = blocks::layer_norm(g, x, &format!("{prefix}.norm1"))?;
    let att = blocks::multi_head_attention(g, z, z, &format!("{prefix}.attn"), heads)?;
    let y = blocks::residual(g, x, att.out, mode, drop_rate)?;
    let z = blocks::layer_norm(g, y, &format!("{prefix}.norm2"))?;
    let m = blocks::mlp(g, z, &format!("{prefix}.mlp"))?;
    Ok((blocks::residual(g, y, m, mode, drop_rate)?, att.probs))
}

fn drop_rate(cfg: &BackboneConfig, mode: &Mode<'_>, layer: usize) -> f64 {
    match mode {
        Mode::Train(reg) => {
            let total = cfg.total_layers();
            if total <= 1 {
                reg.drop_path
            } else {
                reg.drop_path * layer as f64 / (total - 1) as f64
            }
        }
        Mode::Eval => 0.0,
    }
}

/// Runs stage `s` (0-based) on its entry grid `[h, w, d]` (positional
/// encoding already added): spectral layers, attention layers over the
/// flattened `h*w` tokens, then the stride-2 transition to the next width.
/// The last stage has no transition. Returns the output grid and the
/// attention weights of the stage's final attention layer, if any.
pub fn stage_forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    cfg: &BackboneConfig,
    s: usize,
    x: Var,
    mode: &mut Mode<'_>,
) -> Result<(Var, Vec<Var>)> {
    let st = cfg.stages[s];
    let side = cfg.grid(s);
    g.tape.value(x).expect_shape(&[side, side, st.dim])?;
    let p = format!("stage{}", s + 1);
    let mut layer = cfg.first_layer(s);
    let mut x = x;
    for j in 0..st.spectral_layers {
        let rate = drop_rate(cfg, mode, layer);
        x = spectral_layer_forward(g, x, &format!("{p}.spectral{}", j + 1), mode, rate)?;
        layer += 1;
    }
    let mut probs = Vec::new();
    if st.attention_layers > 0 {
        let mut t = g.tape.reshape(x, &[side * side, st.dim])?;
        for j in 0..st.attention_layers {
            let rate = drop_rate(cfg, mode, layer);
            let (y, pr) = self_attention_forward(g, t, &format!("{p}.attn{}", j + 1), st.heads, mode, rate)?;
            t = y;
            probs = pr;
            layer += 1;
        }
        x = g.tape.reshape(t, &[side, side, st.dim])?;
    }
    if s + 1 < cfg.stages.len() {
        let w = g.param(&format!("{p}.down.weight"))?;
        let b = g.param(&format!("{p}.down.bias"))?;
        let y = g.tape.conv2d(x, w, 2, 1)?;
        x = g.tape.add_bias(y, b)?;
    }
    Ok((x, probs))
}

/// Result of a full backbone pass.
pub struct Forward {
    /// Pooled embedding `[d_last]`.
    pub embedding: Var,
    /// Input shape, each stage's entry grid shape, then the embedding shape.
    pub boundaries: Vec<Vec<usize>>,
    /// Per-head attention weights of the last attention layer of the last
    /// stage (empty when that stage has no attention layers).
    pub last_attention: Vec<Var>,
}

pub fn forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    cfg: &BackboneConfig,
    image: Var,
    mode: &mut Mode<'_>,
) -> Result<Forward> {
    cfg.validate()?;
    let mut boundaries = vec![g.tape.shape(image).to_vec()];
    let mut x = patch_embed(g, cfg, image)?;
    let mut last_attention = Vec::new();
    for s in 0..cfg.stages.len() {
        if s > 0 {
            let pos = g.param(&format!("stage{}.pos", s + 1))?;
            x = g.tape.add(x, pos)?;
        }
        boundaries.push(g.tape.shape(x).to_vec());
        let (y, probs) = stage_forward(g, cfg, s, x, mode)?;
        x = y;
        if s + 1 == cfg.stages.len() {
            last_attention = probs;
        }
    }
    let embedding = g.tape.mean_rows(x);
    boundaries.push(g.tape.shape(embedding).to_vec());
    Ok(Forward { embedding, boundaries, last_attention })
}

/// Eval-mode embedding of one `[H, W, C]` image.
pub fn embed<T: Scalar>(cfg: &BackboneConfig, params: &ParamStore<T>, image: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::eval(params);
    let x = g.input(image.clone());
    let out = forward(&mut g, cfg, x, &mut Mode::Eval)?;
    Ok(g.value(out.embedding).clone())
}
