//! Leave-one-subject-out folds and the classifiers evaluated on them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::metrics::{argmax, classification_metrics, Metrics};
use super::optim::{adamw_step, AdamW, AdamWState};
use super::schedule::{cosine_lr, ScheduleConfig};
use crate::error::{ensure, Result};
use crate::kernel::ops::smoothed_cross_entropy;
use crate::kernel::Tensor;
use crate::nn::{Initializer, ParamStore};
use crate::rng::substream;

/// Sample indices of one fold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub subject: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One fold per distinct subject id, in ascending id order.
pub fn loso_split(subjects: &[usize]) -> Result<Vec<Fold>> {
    let ids: BTreeSet<usize> = subjects.iter().copied().collect();
    ensure(ids.len() >= 2, || format!("leave-one-subject-out needs at least 2 subjects, got {}", ids.len()))?;
    Ok(ids
        .into_iter()
        .map(|subject| {
            let (test, train) = (0..subjects.len()).partition(|&i| subjects[i] == subject);
            Fold { subject, train, test }
        })
        .collect())
}

/// Class means of the training features; predicts the nearest mean in
/// Euclidean distance.
#[derive(Clone, Debug)]
pub struct NearestCentroid {
    centroids: Vec<Option<Vec<f64>>>,
}

impl NearestCentroid {
    pub fn fit(features: &[&[f32]], labels: &[usize], classes: usize) -> Result<Self> {
        ensure(!features.is_empty() && features.len() == labels.len(), || "features and labels must align".into())?;
        let d = features[0].len();
        let mut sums = vec![vec![0.0f64; d]; classes];
        let mut counts = vec![0usize; classes];
        for (x, &y) in features.iter().zip(labels) {
            ensure(y < classes && x.len() == d, || format!("bad sample: label {y}, length {}", x.len()))?;
            counts[y] += 1;
            sums[y].iter_mut().zip(x.iter()).for_each(|(s, &v)| *s += v as f64);
        }
        let centroids = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| (n > 0).then(|| s.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        Ok(Self { centroids })
    }

    pub fn predict(&self, x: &[f32]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, mu) in self.centroids.iter().enumerate() {
            let Some(mu) = mu else { continue };
            let d: f64 = mu.iter().zip(x).map(|(m, &v)| (m - v as f64).powi(2)).sum();
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }
}

/// Softmax-linear classifier on standardized features, trained full-batch
/// with AdamW and label smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub schedule: ScheduleConfig,
    pub optimizer: AdamW,
    pub label_smoothing: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig {
                base_lr: 1e-2,
                warmup_epochs: 1,
                cooldown_epochs: 1,
                total_epochs: 10,
                steps_per_epoch: 10,
                min_lr_ratio: 0.01,
            },
            optimizer: AdamW { weight_decay: 0.01, ..AdamW::default() },
            label_smoothing: 0.1,
        }
    }
}

struct Probe {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    params: ParamStore<f64>,
    classes: usize,
}

impl Probe {
    fn standardize(&self, x: &[f32]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.inv_std).map(|((&v, m), s)| (v as f64 - m) * s).collect()
    }

    fn logits(&self, z: &[f64]) -> Vec<f64> {
        let w = self.params.get("probe.weight").expect("probe weight").data();
        let b = self.params.get("probe.bias").expect("probe bias").data();
        let mut out = b.to_vec();
        for (i, &zi) in z.iter().enumerate() {
            for (o, &wv) in out.iter_mut().zip(&w[i * self.classes..(i + 1) * self.classes]) {
                *o += zi * wv;
            }
        }
        out
    }

    fn fit(features: &[&[f32]], labels: &[usize], classes: usize, cfg: &ProbeConfig, seed: u64) -> Result<Self> {
        cfg.schedule.validate()?;
        let d = features[0].len();
        let n = features.len() as f64;
        let mut mean = vec![0.0; d];
        for x in features {
            mean.iter_mut().zip(x.iter()).for_each(|(m, &v)| *m += v as f64 / n);
        }
        let mut var = vec![0.0; d];
        for x in features {
            var.iter_mut().zip(x.iter()).zip(&mean).for_each(|((s, &v), m)| *s += (v as f64 - m).powi(2) / n);
        }
        let inv_std = var.iter().map(|&v| if v > 1e-12 { 1.0 / v.sqrt() } else { 0.0 }).collect();
        let mut init = Initializer::new(substream(seed, "probe.init"));
        let mut params = ParamStore::new();
        params.insert("probe.weight", init.normal(&[d, classes], 0.01))?;
        params.insert("probe.bias", Tensor::zeros(&[classes]))?;
        let mut probe = Probe { mean, inv_std, params, classes };
        let z: Vec<Vec<f64>> = features.iter().map(|x| probe.standardize(x)).collect();

        let mut state = AdamWState::default();
        for step in 0..cfg.schedule.total_steps() {
            // dL/dW = Z^T (P - Q) / n, dL/db = mean(P - Q)
            let mut gw = vec![0.0; d * classes];
            let mut gb = vec![0.0; classes];
            for (zi, &y) in z.iter().zip(labels) {
                let (_, dl) = smoothed_cross_entropy(&probe.logits(zi), y, cfg.label_smoothing)?;
                for (j, &v) in zi.iter().enumerate() {
                    for (g, &e) in gw[j * classes..(j + 1) * classes].iter_mut().zip(&dl) {
                        *g += v * e / n;
                    }
                }
                gb.iter_mut().zip(&dl).for_each(|(g, &e)| *g += e / n);
            }
            let mut grads = ParamStore::new();
            grads.insert("probe.weight", Tensor::new(vec![d, classes], gw)?)?;
            grads.insert("probe.bias", Tensor::new(vec![classes], gb)?)?;
            adamw_step(&mut probe.params, &grads, &mut state, &cfg.optimizer, cosine_lr(step, &cfg.schedule))?;
        }
        Ok(probe)
    }

    fn predict(&self, x: &[f32]) -> usize {
        argmax(&self.logits(&self.standardize(x)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Centroid,
    Probe(ProbeConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub subject: usize,
    pub metrics: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub folds: Vec<FoldReport>,
    pub mean: Metrics,
}

/// Trains `classifier` on every fold's training subjects and scores it on
/// the held-out subject.
pub fn run_loso(
    features: &[Vec<f32>],
    labels: &[usize],
    subjects: &[usize],
    classes: usize,
    classifier: &Classifier,
    seed: u64,
) -> Result<LosoReport> {
    ensure(features.len() == labels.len() && labels.len() == subjects.len(), || {
        format!("{} features, {} labels, {} subject ids", features.len(), labels.len(), subjects.len())
    })?;
    let d = features.first().map_or(0, Vec::len);
    ensure(d > 0 && features.iter().all(|x| x.len() == d), || "features must be non-empty and equally long".into())?;
    let mut folds = Vec::new();
    for fold in loso_split(subjects)? {
        let xs: Vec<&[f32]> = fold.train.iter().map(|&i| features[i].as_slice()).collect();
        let ys: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
        let predict: Box<dyn Fn(&[f32]) -> usize> = match classifier {
            Classifier::Centroid => {
                let m = NearestCentroid::fit(&xs, &ys, classes)?;
                Box::new(move |x| m.predict(x))
            }
            Classifier::Probe(cfg) => {
                let p = Probe::fit(&xs, &ys, classes, cfg, seed ^ fold.subject as u64)?;
                Box::new(move |x| p.predict(x))
            }
        };
        let truth: Vec<usize> = fold.test.iter().map(|&i| labels[i]).collect();
        let pred: Vec<usize> = fold.test.iter().map(|&i| predict(&features[i])).collect();
        folds.push(FoldReport { subject: fold.subject, metrics: classification_metrics(&truth, &pred, classes)? });
    }
    let all: Vec<Metrics> = folds.iter().map(|f| f.metrics).collect();
    Ok(LosoReport { folds, mean: Metrics::mean(&all) })
}
