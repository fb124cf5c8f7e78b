use crate::error::{ensure, Result};

/// Width of every backbone embedding.
pub const EMBEDDING_DIM: usize = 160;

fn check_dim(values: &[f32], what: &str) -> Result<()> {
    ensure(values.len() == EMBEDDING_DIM, || format!("{what} must have {EMBEDDING_DIM} values, got {}", values.len()))
}

macro_rules! fixed_embedding {
    ($(#[$doc:meta])* $name:ident, $what:literal) => {
        $(#[$doc])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name(Vec<f32>);

        impl $name {
            pub fn new(values: Vec<f32>) -> Result<Self> {
                check_dim(&values, $what)?;
                Ok(Self(values))
            }

            pub fn values(&self) -> &[f32] {
                &self.0
            }

            pub fn into_values(self) -> Vec<f32> {
                self.0
            }
        }
    };
}

fixed_embedding!(
    /// Backbone embedding of one image.
    FrameEmbedding,
    "frame embedding"
);
fixed_embedding!(
    /// Elementwise sum of frame embeddings.
    PooledEmbedding,
    "pooled embedding"
);
fixed_embedding!(
    /// Embedding of a skin-conductance waveform image.
    GsrEmbedding,
    "GSR embedding"
);

/// Sum of per-channel fNIRS embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct FnirsEmbedding {
    values: Vec<f32>,
    channels_used: usize,
}

impl FnirsEmbedding {
    pub fn new(values: Vec<f32>, channels_used: usize) -> Result<Self> {
        check_dim(&values, "fNIRS embedding")?;
        Ok(Self { values, channels_used })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channels_used(&self) -> usize {
        self.channels_used
    }
}

/// Frame embeddings of one video laid end to end.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoEmbedding {
    values: Vec<f32>,
    frames: usize,
}

impl VideoEmbedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        ensure(!values.is_empty() && values.len() % EMBEDDING_DIM == 0, || {
            format!("video embedding length {} is not a positive multiple of {EMBEDDING_DIM}", values.len())
        })?;
        let frames = values.len() / EMBEDDING_DIM;
        Ok(Self { values, frames })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }
}

/// Where one part of a concatenation came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Span {
    pub source: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedEmbedding {
    pub values: Vec<f32>,
    pub provenance: Vec<Span>,
}

impl FusedEmbedding {
    /// Recovers the concatenated parts in order.
    pub fn split(&self) -> Vec<(&str, &[f32])> {
        self.provenance.iter().map(|s| (s.source.as_str(), &self.values[s.start..s.start + s.len])).collect()
    }
}
