use crate::error::Result;
use crate::kernel::{Scalar, Var};
use crate::nn::blocks;
use crate::nn::{Graph, Initializer, Mode, ParamStore};

/// Norms on both sides, attention with latent queries (`d -> d`) and input
/// keys/values (`d_in -> d`), then an MLP.
pub fn init_cross_attention<T: Scalar>(
    store: &mut ParamStore<T>,
    init: &mut Initializer,
    prefix: &str,
    d: usize,
    d_in: usize,
    ratio: usize,
) -> Result<()> {
    blocks::init_norm(store, &format!("{prefix}.norm_latent"), d)?;
    blocks::init_norm(store, &format!("{prefix}.norm_input"), d_in)?;
    blocks::init_attention(store, init, &format!("{prefix}.attn"), d, d_in, d)?;
    blocks::init_norm(store, &format!("{prefix}.norm2"), d)?;
    blocks::init_mlp(store, init, &format!("{prefix}.mlp"), d, ratio, false)
}

pub struct CrossAttentionOut {
    pub latents: Var,
    /// Per-head weights `[n, N]`.
    pub probs: Vec<Var>,
}

/// Latents `[n, d]` attend to inputs `[N, d_in]`; cost is `O(n N d)`.
/// Residual around the attention core and around the MLP.
pub fn cross_attention<T: Scalar>(
    g: &mut Graph<'_, T>,
    latents: Var,
    inputs: Var,
    prefix: &str,
    heads: usize,
    mode: &mut Mode<'_>,
) -> Result<CrossAttentionOut> {
    let q = blocks::layer_norm(g, latents, &format!("{prefix}.norm_latent"))?;
    let kv = blocks::layer_norm(g, inputs, &format!("{prefix}.norm_input"))?;
    let att = blocks::multi_head_attention(g, q, kv, &format!("{prefix}.attn"), heads)?;
    let y = blocks::residual(g, latents, att.out, mode, 0.0)?;
    let z = blocks::layer_norm(g, y, &format!("{prefix}.norm2"))?;
    let m = blocks::mlp(g, z, &format!("{prefix}.mlp"))?;
    Ok(CrossAttentionOut { latents: blocks::residual(g, y, m, mode, 0.0)?, probs: att.probs })
}
