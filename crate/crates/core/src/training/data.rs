//! Class-conditional synthetic image tasks with per-subject offsets.
//!
//! A sample of class `c` from subject `s` is `mean_c + offset_s + noise`.
//! Class means are independent blocky Gaussian patterns (constant over 4x4
//! pixel blocks, per channel) with per-element RMS `separation / sqrt(2)`,
//! so two class means differ by about `separation` per element, measured in
//! units of the unit-variance pixel noise. Subject offsets are blocky
//! patterns with RMS [`SUBJECT_SCALE`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::kernel::Tensor;
use crate::rng::substream;

pub const SUBJECT_SCALE: f64 = 0.5;
const BLOCK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub classes: usize,
    pub subjects: usize,
    pub samples_per_subject: usize,
    pub separation: f64,
}

impl TaskSpec {
    pub fn new(classes: usize, subjects: usize, samples_per_subject: usize, separation: f64) -> Self {
        Self { classes, subjects, samples_per_subject, separation }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub subject: usize,
    pub label: usize,
    /// `[side, side, channels]`.
    pub image: Tensor<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTask {
    pub id: usize,
    pub classes: usize,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl SyntheticTask {
    pub fn subjects(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.subject).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Flattened images, one row per sample.
    pub fn features(&self) -> Vec<Vec<f32>> {
        self.samples.iter().map(|s| s.image.data().to_vec()).collect()
    }
}

fn blocky_pattern(rng: &mut ChaCha8Rng, side: usize, channels: usize, rms: f64) -> Vec<f64> {
    let blocks = side.div_ceil(BLOCK);
    let coarse: Vec<f64> = (0..blocks * blocks * channels).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Vec::with_capacity(side * side * channels);
    for y in 0..side {
        for x in 0..side {
            let b = (y / BLOCK) * blocks + x / BLOCK;
            out.extend_from_slice(&coarse[b * channels..(b + 1) * channels]);
        }
    }
    let norm = (out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64).sqrt();
    let k = if norm > 0.0 { rms / norm } else { 0.0 };
    out.iter_mut().for_each(|v| *v *= k);
    out
}

/// One task per spec. Task `t` draws from its own `data.task{t}` stream, so
/// tasks are independent of each other's sizes.
pub fn generate_synthetic_tasks(specs: &[TaskSpec], side: usize, channels: usize, seed: u64) -> Result<Vec<SyntheticTask>> {
    ensure(side >= 1 && channels >= 1, || "image side and channels must be positive".into())?;
    let mut tasks = Vec::with_capacity(specs.len());
    for (t, spec) in specs.iter().enumerate() {
        ensure(spec.separation > 0.0 && spec.separation.is_finite(), || {
            format!("task {t}: separation {} must be positive", spec.separation)
        })?;
        ensure(spec.classes >= 2, || format!("task {t}: needs at least 2 classes"))?;
        ensure(spec.subjects >= 1 && spec.samples_per_subject >= 1, || format!("task {t}: empty task"))?;
        let mut rng = substream(seed, &format!("data.task{t}"));
        let class_rms = spec.separation / std::f64::consts::SQRT_2;
        let means: Vec<Vec<f64>> =
            (0..spec.classes).map(|_| blocky_pattern(&mut rng, side, channels, class_rms)).collect();
        let mut samples = Vec::with_capacity(spec.subjects * spec.samples_per_subject);
        for subject in 0..spec.subjects {
            let offset = blocky_pattern(&mut rng, side, channels, SUBJECT_SCALE);
            for k in 0..spec.samples_per_subject {
                let label = (k + subject) % spec.classes;
                let data = means[label]
                    .iter()
                    .zip(&offset)
                    .map(|(m, o)| (m + o + rng.sample::<f64, _>(StandardNormal)) as f32)
                    .collect();
                samples.push(Sample { subject, label, image: Tensor::new(vec![side, side, channels], data)? });
            }
        }
        tasks.push(SyntheticTask { id: t, classes: spec.classes, seed, samples });
    }
    Ok(tasks)
}

/// Splits `total` across groups in proportion to `sizes` by largest
/// remainder, after giving every group one slot. Ties in the remainder go
/// to the lower index.
pub fn apportion(total: usize, sizes: &[usize]) -> Result<Vec<usize>> {
    ensure(!sizes.is_empty() && total >= sizes.len(), || {
        format!("cannot give each of {} groups at least one of {total}", sizes.len())
    })?;
    let weight: usize = sizes.iter().sum();
    ensure(weight > 0, || "group sizes are all zero".into())?;
    let free = total - sizes.len();
    let mut counts: Vec<usize> = sizes.iter().map(|&s| 1 + free * s / weight).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainder of free * s / weight, compared exactly
    order.sort_by_key(|&i| std::cmp::Reverse((free * sizes[i]) % weight));
    let left = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        counts[i] += 1;
    }
    Ok(counts)
}
