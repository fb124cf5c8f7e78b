//! Latent cross-attention heads over backbone embeddings.

pub mod cross_attention;
pub mod mixer;
pub mod video_encoder;

pub use cross_attention::{cross_attention, init_cross_attention, CrossAttentionOut};
pub use mixer::{init_mixer, mix, mixer_forward, MixerConfig};
pub use video_encoder::{encode_video, init_video_encoder, video_encoder_forward, VideoEncoderConfig};

use crate::error::Result;
use crate::kernel::{Scalar, Var};
use crate::nn::blocks;
use crate::nn::Graph;

/// Mean over latents followed by a linear map: `[n, d] -> [out]`.
pub(crate) fn pool_project<T: Scalar>(g: &mut Graph<'_, T>, latents: Var, prefix: &str) -> Result<Var> {
    let pooled = g.tape.mean_rows(latents);
    let d = g.tape.shape(pooled)[0];
    let row = g.tape.reshape(pooled, &[1, d])?;
    let y = blocks::linear(g, row, prefix)?;
    let out = g.tape.shape(y)[1];
    g.tape.reshape(y, &[out])
}
