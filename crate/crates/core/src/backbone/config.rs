use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Layer counts and token width of one stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageConfig {
    pub spectral_layers: usize,
    pub attention_layers: usize,
    pub heads: usize,
    pub dim: usize,
}

impl StageConfig {
    pub const fn new(spectral_layers: usize, attention_layers: usize, heads: usize, dim: usize) -> Self {
        Self { spectral_layers, attention_layers, heads, dim }
    }

    pub fn layers(&self) -> usize {
        self.spectral_layers + self.attention_layers
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub in_channels: usize,
    pub mlp_ratio: usize,
    pub stages: Vec<StageConfig>,
}

impl Default for BackboneConfig {
    /// 224x224 RGB input, 16x16 patches, four stages ending at width 160.
    fn default() -> Self {
        Self {
            image_size: 224,
            patch_size: 16,
            in_channels: 3,
            mlp_ratio: 4,
            stages: vec![
                StageConfig::new(2, 1, 2, 64),
                StageConfig::new(2, 2, 4, 128),
                StageConfig::new(0, 12, 10, 320),
                StageConfig::new(0, 3, 16, 160),
            ],
        }
    }
}

impl BackboneConfig {
    /// Reduced model for CPU training runs: 32x32 inputs, 4x4 patches,
    /// widths 16/32/48/32.
    pub fn toy() -> Self {
        Self {
            image_size: 32,
            patch_size: 4,
            in_channels: 3,
            mlp_ratio: 4,
            stages: vec![
                StageConfig::new(1, 1, 2, 16),
                StageConfig::new(1, 1, 2, 32),
                StageConfig::new(0, 1, 4, 48),
                StageConfig::new(0, 1, 4, 32),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.stages.is_empty(), || "backbone needs at least one stage".into())?;
        ensure(self.in_channels >= 1 && self.mlp_ratio >= 1, || "channels and MLP ratio must be positive".into())?;
        ensure(self.patch_size >= 1 && self.image_size % self.patch_size == 0, || {
            format!("image size {} is not a multiple of patch size {}", self.image_size, self.patch_size)
        })?;
        for (i, s) in self.stages.iter().enumerate() {
            ensure(s.dim >= 1, || format!("stage {} has zero width", i + 1))?;
            ensure(s.attention_layers == 0 || (s.heads >= 1 && s.dim % s.heads == 0), || {
                format!("stage {} width {} is not divisible by {} heads", i + 1, s.dim, s.heads)
            })?;
        }
        Ok(())
    }

    /// Token grid side at the entry of stage `s` (0-based). Each transition
    /// halves it, rounding up.
    pub fn grid(&self, s: usize) -> usize {
        (0..s).fold(self.image_size / self.patch_size, |g, _| g.div_ceil(2))
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.in_channels
    }

    pub fn embedding_dim(&self) -> usize {
        self.stages.last().expect("validated config has stages").dim
    }

    pub fn total_layers(&self) -> usize {
        self.stages.iter().map(StageConfig::layers).sum()
    }

    /// Global index of the first layer of stage `s`.
    pub(crate) fn first_layer(&self, s: usize) -> usize {
        self.stages[..s].iter().map(StageConfig::layers).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids_halve_with_ceiling() {
        let cfg = BackboneConfig::default();
        cfg.validate().unwrap();
        assert_eq!((0..4).map(|s| cfg.grid(s)).collect::<Vec<_>>(), vec![14, 7, 4, 2]);
        assert_eq!(cfg.embedding_dim(), 160);
        assert_eq!(cfg.patch_dim(), 768);
    }

    #[test]
    fn toy_is_valid() {
        let cfg = BackboneConfig::toy();
        cfg.validate().unwrap();
        assert_eq!((0..4).map(|s| cfg.grid(s)).collect::<Vec<_>>(), vec![8, 4, 2, 1]);
    }

    #[test]
    fn head_divisibility_is_checked() {
        let mut cfg = BackboneConfig::toy();
        cfg.stages[0].heads = 3;
        assert!(cfg.validate().is_err());
    }
}
