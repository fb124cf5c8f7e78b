use serde::{Deserialize, Serialize};

use super::cross_attention::{cross_attention, init_cross_attention};
use super::pool_project;
use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor, Var};
use crate::nn::blocks::{self, INIT_STD};
use crate::nn::{Graph, Initializer, Mode, ParamStore};
use crate::rng::substream;

/// Compresses a unified video embedding to a short vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoEncoderConfig {
    pub layers: usize,
    pub cross_heads: usize,
    pub latents: usize,
    pub latent_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub mlp_ratio: usize,
}

impl Default for VideoEncoderConfig {
    fn default() -> Self {
        Self { layers: 1, cross_heads: 1, latents: 256, latent_dim: 512, input_dim: 160, output_dim: 40, mlp_ratio: 4 }
    }
}

/// Names: `video.latents`, `video.layer{l}.cross.*`, `video.out`.
pub fn init_video_encoder<T: Scalar>(cfg: &VideoEncoderConfig, seed: u64) -> Result<ParamStore<T>> {
    ensure(cfg.latent_dim % cfg.cross_heads == 0, || {
        format!("latent width {} not divisible by {} heads", cfg.latent_dim, cfg.cross_heads)
    })?;
    let mut init = Initializer::new(substream(seed, "video.init"));
    let mut store = ParamStore::new();
    let d = cfg.latent_dim;
    store.insert("video.latents", init.normal(&[cfg.latents, d], INIT_STD))?;
    for l in 1..=cfg.layers {
        init_cross_attention(&mut store, &mut init, &format!("video.layer{l}.cross"), d, cfg.input_dim, cfg.mlp_ratio)?;
    }
    blocks::init_linear(&mut store, &mut init, "video.out", d, cfg.output_dim)?;
    Ok(store)
}

/// `unified: [m * input_dim]` (or already `[m, input_dim]`) -> `[output_dim]`.
pub fn video_encoder_forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    cfg: &VideoEncoderConfig,
    unified: Var,
    mode: &mut Mode<'_>,
) -> Result<Var> {
    let n = g.tape.value(unified).numel();
    ensure(n % cfg.input_dim == 0, || {
        format!("unified embedding length {n} is not a multiple of {}", cfg.input_dim)
    })?;
    let tokens = g.tape.reshape(unified, &[n / cfg.input_dim, cfg.input_dim])?;
    let mut lat = g.param("video.latents")?;
    for l in 1..=cfg.layers {
        lat = cross_attention(g, lat, tokens, &format!("video.layer{l}.cross"), cfg.cross_heads, mode)?.latents;
    }
    pool_project(g, lat, "video.out")
}

/// Eval-mode encoder pass.
pub fn encode_video<T: Scalar>(cfg: &VideoEncoderConfig, params: &ParamStore<T>, unified: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::eval(params);
    let x = g.input(unified.clone());
    let y = video_encoder_forward(&mut g, cfg, x, &mut Mode::Eval)?;
    Ok(g.value(y).clone())
}
