use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Linear warmup, cosine decay to a floor, then a constant cooldown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub cooldown_epochs: usize,
    pub total_epochs: usize,
    pub steps_per_epoch: usize,
    /// Floor of the cosine phase as a fraction of `base_lr`.
    pub min_lr_ratio: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            base_lr: 2e-5,
            warmup_epochs: 5,
            cooldown_epochs: 10,
            total_epochs: 200,
            steps_per_epoch: 1,
            min_lr_ratio: 0.01,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.base_lr > 0.0 && self.base_lr.is_finite(), || format!("base lr {} must be positive", self.base_lr))?;
        ensure((0.0..=1.0).contains(&self.min_lr_ratio), || format!("min lr ratio {} outside [0, 1]", self.min_lr_ratio))?;
        ensure(self.steps_per_epoch >= 1, || "steps per epoch must be positive".into())?;
        ensure(self.warmup_epochs + self.cooldown_epochs < self.total_epochs, || {
            format!(
                "warmup {} + cooldown {} must be shorter than {} total epochs",
                self.warmup_epochs, self.cooldown_epochs, self.total_epochs
            )
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_epochs * self.steps_per_epoch
    }

    pub fn min_lr(&self) -> f64 {
        self.base_lr * self.min_lr_ratio
    }

    /// Phase boundaries in steps: end of warmup, end of the cosine phase.
    pub fn boundaries(&self) -> (usize, usize) {
        let w = self.warmup_epochs * self.steps_per_epoch;
        (w, self.total_steps() - self.cooldown_epochs * self.steps_per_epoch)
    }

    /// Learning rate at a continuous step position; past the end it stays at
    /// the floor.
    pub fn lr_at(&self, t: f64) -> f64 {
        let (w, c) = self.boundaries();
        let (w, c) = (w as f64, c as f64);
        let lo = self.min_lr();
        if t < w {
            self.base_lr * t.max(0.0) / w
        } else if t < c {
            let progress = (t - w) / (c - w);
            lo + (self.base_lr - lo) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
        } else {
            lo
        }
    }
}

pub fn cosine_lr(step: usize, cfg: &ScheduleConfig) -> f64 {
    cfg.lr_at(step as f64)
}
