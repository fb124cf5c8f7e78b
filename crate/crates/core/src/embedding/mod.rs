//! Embedding records, aggregation and fusion, and embedding-space
//! augmentation.

pub mod augment;
pub mod fusion;
pub mod types;

pub use augment::{augment_basic, augment_masking, mask_span, NoiseStd};
pub use fusion::{
    concat_frame_embeddings, fnirs_aggregate, fuse_add, fuse_concat, fuse_decision, multimodal_biovid_fuse,
    sum_frame_embeddings,
};
pub use types::{
    FnirsEmbedding, FrameEmbedding, FusedEmbedding, GsrEmbedding, PooledEmbedding, Span, VideoEmbedding,
    EMBEDDING_DIM,
};
