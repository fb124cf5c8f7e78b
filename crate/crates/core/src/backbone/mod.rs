//! The hierarchical spectral/attention feature extractor.

pub mod attention_map;
pub mod config;
pub mod model;

pub use attention_map::{attention_map, bilinear_resize, min_max_normalize};
pub use config::{BackboneConfig, StageConfig};
pub use model::{
    aux_logits, embed, forward, init_aux_heads, init_params, patch_embed, self_attention_forward,
    spectral_gate, spectral_layer_forward, stage_forward, Forward,
};
