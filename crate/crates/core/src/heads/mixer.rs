use serde::{Deserialize, Serialize};

use super::cross_attention::{cross_attention, init_cross_attention};
use super::pool_project;
use crate::backbone::self_attention_forward;
use crate::error::{ensure, Result};
use crate::kernel::{Scalar, Tensor, Var};
use crate::nn::blocks::{self, INIT_STD};
use crate::nn::{Graph, Initializer, Mode, ParamStore};
use crate::rng::substream;

/// Classification head over a token sequence of embeddings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixerConfig {
    pub layers: usize,
    pub cross_heads: usize,
    pub self_heads: usize,
    pub self_blocks: usize,
    pub latents: usize,
    pub latent_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub classes: usize,
    pub mlp_ratio: usize,
}

impl MixerConfig {
    pub fn new(classes: usize) -> Self {
        Self {
            layers: 2,
            cross_heads: 1,
            self_heads: 8,
            self_blocks: 2,
            latents: 256,
            latent_dim: 384,
            input_dim: 160,
            output_dim: 512,
            classes,
            mlp_ratio: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.classes >= 2, || format!("mixer needs at least 2 classes, got {}", self.classes))?;
        ensure(self.latents >= 1 && self.layers >= 1, || "mixer needs latents and layers".into())?;
        ensure(self.latent_dim % self.cross_heads == 0 && self.latent_dim % self.self_heads == 0, || {
            format!("latent width {} not divisible by head counts", self.latent_dim)
        })
    }
}

/// Names: `mixer.latents`, `mixer.layer{l}.cross.*`, `mixer.layer{l}.self{b}.*`,
/// `mixer.out`, `mixer.classifier`.
pub fn init_mixer<T: Scalar>(cfg: &MixerConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut init = Initializer::new(substream(seed, "mixer.init"));
    let mut store = ParamStore::new();
    let d = cfg.latent_dim;
    store.insert("mixer.latents", init.normal(&[cfg.latents, d], INIT_STD))?;
    for l in 1..=cfg.layers {
        init_cross_attention(&mut store, &mut init, &format!("mixer.layer{l}.cross"), d, cfg.input_dim, cfg.mlp_ratio)?;
        for b in 1..=cfg.self_blocks {
            blocks::init_attention_block(&mut store, &mut init, &format!("mixer.layer{l}.self{b}"), d, cfg.mlp_ratio)?;
        }
    }
    blocks::init_linear(&mut store, &mut init, "mixer.out", d, cfg.output_dim)?;
    blocks::init_linear(&mut store, &mut init, "mixer.classifier", cfg.output_dim, cfg.classes)?;
    Ok(store)
}

/// `tokens: [N, input_dim]` -> (`embedding: [output_dim]`, `logits: [classes]`).
pub fn mixer_forward<T: Scalar>(
    g: &mut Graph<'_, T>,
    cfg: &MixerConfig,
    tokens: Var,
    mode: &mut Mode<'_>,
) -> Result<(Var, Var)> {
    let shape = g.tape.shape(tokens).to_vec();
    ensure(shape.len() == 2 && shape[0] >= 1 && shape[1] == cfg.input_dim, || {
        format!("mixer expects a non-empty [N, {}] token sequence, got {shape:?}", cfg.input_dim)
    })?;
    let mut lat = g.param("mixer.latents")?;
    for l in 1..=cfg.layers {
        lat = cross_attention(g, lat, tokens, &format!("mixer.layer{l}.cross"), cfg.cross_heads, mode)?.latents;
        for b in 1..=cfg.self_blocks {
            lat = self_attention_forward(g, lat, &format!("mixer.layer{l}.self{b}"), cfg.self_heads, mode, 0.0)?.0;
        }
    }
    let emb = pool_project(g, lat, "mixer.out")?;
    let row = g.tape.reshape(emb, &[1, cfg.output_dim])?;
    let logits = blocks::linear(g, row, "mixer.classifier")?;
    let logits = g.tape.reshape(logits, &[cfg.classes])?;
    Ok((emb, logits))
}

/// Eval-mode mixer pass.
pub fn mix<T: Scalar>(cfg: &MixerConfig, params: &ParamStore<T>, tokens: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut g = Graph::eval(params);
    let x = g.input(tokens.clone());
    let (e, l) = mixer_forward(&mut g, cfg, x, &mut Mode::Eval)?;
    Ok((g.value(e).clone(), g.value(l).clone()))
}
