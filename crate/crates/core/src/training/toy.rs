//! Joint training of the backbone on several synthetic tasks at once.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::data::{apportion, SyntheticTask};
use super::loss::{multitask_loss_tape, MultitaskMode};
use super::metrics::argmax;
use super::optim::{adamw_step, AdamW, AdamWState};
use super::schedule::{cosine_lr, ScheduleConfig};
use crate::backbone::{aux_logits, forward, init_aux_heads, init_params, BackboneConfig};
use crate::error::{ensure, Result};
use crate::kernel::{Tensor, Var};
use crate::nn::{Graph, Mode, ParamStore, Regularization};
use crate::rng::substream;

/// Parameter holding the learned per-task loss weights `w`, shape `[tasks]`.
pub const MTL_WEIGHTS: &str = "mtl.w";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub schedule: ScheduleConfig,
    pub optimizer: AdamW,
    /// Samples per step, split across tasks in proportion to their size.
    pub batch_size: usize,
    pub label_smoothing: f64,
    /// DropPath rate at the deepest layer.
    pub drop_path: f64,
    pub dropout: f64,
    pub mode: MultitaskMode,
    /// The highest-numbered subjects of each task, held out for evaluation.
    pub holdout_subjects: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: ScheduleConfig {
                base_lr: 2e-3,
                warmup_epochs: 2,
                cooldown_epochs: 2,
                total_epochs: 30,
                steps_per_epoch: 10,
                min_lr_ratio: 0.01,
            },
            optimizer: AdamW::default(),
            batch_size: 12,
            label_smoothing: 0.1,
            drop_path: 0.1,
            dropout: 0.0,
            mode: MultitaskMode::Standard,
            holdout_subjects: 2,
        }
    }
}

/// One line of the metric trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub total: f64,
    /// Mean smoothed cross-entropy of each task's share of the batch.
    pub loss: Vec<f64>,
    /// Task weights before this step's update.
    pub w: Vec<f64>,
    /// Batch accuracy per task.
    pub accuracy: Vec<f64>,
}

pub struct TrainOutcome {
    pub params: ParamStore<f32>,
    /// Held-out accuracy per task after the last step.
    pub accuracy: Vec<f64>,
    pub trace: Vec<StepRecord>,
    pub final_loss: f64,
}

/// Writes the trace as JSON lines.
pub fn write_trace(trace: &[StepRecord], mut out: impl Write) -> Result<()> {
    for r in trace {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Train and held-out sample indices of one task.
fn split(task: &SyntheticTask, holdout: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut ids = task.subjects();
    ids.sort_unstable();
    ids.dedup();
    ensure(holdout < ids.len(), || {
        format!("task {}: holding out {holdout} of {} subjects leaves nothing to train on", task.id, ids.len())
    })?;
    let cut = ids[ids.len() - holdout..].first().copied().unwrap_or(usize::MAX);
    Ok((0..task.samples.len()).partition(|&i| task.samples[i].subject < cut))
}

/// Held-out (or, with no holdout, training) accuracy per task in eval mode.
pub fn evaluate(cfg: &BackboneConfig, params: &ParamStore<f32>, task: &SyntheticTask, indices: &[usize]) -> Result<f64> {
    let mut correct = 0;
    for &i in indices {
        let s = &task.samples[i];
        let mut g = Graph::eval(params);
        let x = g.input(s.image.clone());
        let fw = forward(&mut g, cfg, x, &mut Mode::Eval)?;
        let logits = aux_logits(&mut g, fw.embedding, task.id, &mut Mode::Eval)?;
        correct += usize::from(argmax(g.value(logits).data()) == s.label);
    }
    Ok(correct as f64 / indices.len().max(1) as f64)
}

/// Trains backbone, per-task heads and task weights jointly. Every step
/// draws a batch apportioned across tasks by training-set size, combines the
/// per-task mean losses with the learned weights and applies one AdamW
/// update. The result depends only on the inputs and `seed`.
pub fn train_toy_multitask(
    cfg: &BackboneConfig,
    tasks: &[SyntheticTask],
    train: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    train.schedule.validate()?;
    ensure(!tasks.is_empty(), || "no tasks to train on".into())?;
    let shape = [cfg.image_size, cfg.image_size, cfg.in_channels];
    for (t, task) in tasks.iter().enumerate() {
        ensure(task.id == t, || format!("task at position {t} has id {}", task.id))?;
        ensure(task.samples.iter().all(|s| s.image.shape() == shape && s.label < task.classes), || {
            format!("task {t}: samples must be {shape:?} images with labels below {}", task.classes)
        })?;
    }
    let splits: Vec<(Vec<usize>, Vec<usize>)> =
        tasks.iter().map(|t| split(t, train.holdout_subjects)).collect::<Result<_>>()?;
    let sizes: Vec<usize> = splits.iter().map(|(tr, _)| tr.len()).collect();
    let shares = apportion(train.batch_size, &sizes)?;

    let mut params = init_params::<f32>(cfg, seed)?;
    let classes: Vec<usize> = tasks.iter().map(|t| t.classes).collect();
    init_aux_heads(&mut params, cfg.embedding_dim(), &classes, seed)?;
    params.insert(MTL_WEIGHTS, Tensor::zeros(&[tasks.len()]))?;

    let mut batch_rng = substream(seed, "train.batch");
    let mut reg_rng = substream(seed, "train.regularize");
    let mut state = AdamWState::default();
    let mut trace = Vec::with_capacity(train.schedule.total_steps());
    let eps = train.label_smoothing as f32;

    for step in 0..train.schedule.total_steps() {
        let lr = cosine_lr(step, &train.schedule);
        let grads;
        let record;
        {
            let mut g = Graph::trainable(&params);
            let mut mode = Mode::Train(Regularization { rng: &mut reg_rng, drop_path: train.drop_path, dropout: train.dropout });
            let mut task_losses: Vec<Var> = Vec::with_capacity(tasks.len());
            let mut accuracy = Vec::with_capacity(tasks.len());
            for (t, task) in tasks.iter().enumerate() {
                let pool = &splits[t].0;
                let mut sum: Option<Var> = None;
                let mut correct = 0;
                for _ in 0..shares[t] {
                    let s = &task.samples[pool[batch_rng.random_range(0..pool.len())]];
                    let x = g.input(s.image.clone());
                    let fw = forward(&mut g, cfg, x, &mut mode)?;
                    let logits = aux_logits(&mut g, fw.embedding, t, &mut mode)?;
                    correct += usize::from(argmax(g.value(logits).data()) == s.label);
                    let ce = g.tape.cross_entropy(logits, s.label, eps)?;
                    sum = Some(match sum {
                        Some(acc) => g.tape.add(acc, ce)?,
                        None => ce,
                    });
                }
                let mean = g.tape.scale(sum.expect("every task gets at least one sample"), 1.0 / shares[t] as f32);
                task_losses.push(g.tape.reshape(mean, &[1, 1])?);
                accuracy.push(correct as f64 / shares[t] as f64);
            }
            let row = g.tape.concat_cols(&task_losses)?;
            let losses = g.tape.reshape(row, &[tasks.len()])?;
            let w = g.param(MTL_WEIGHTS)?;
            let total = multitask_loss_tape(&mut g.tape, losses, w, train.mode)?;
            record = StepRecord {
                step,
                lr,
                total: g.value(total).data()[0] as f64,
                loss: g.value(losses).data().iter().map(|&v| v as f64).collect(),
                w: g.value(w).data().iter().map(|&v| v as f64).collect(),
                accuracy,
            };
            grads = g.gradients(total)?;
        }
        adamw_step(&mut params, &grads, &mut state, &train.optimizer, lr)?;
        trace.push(record);
    }

    let mut accuracy = Vec::with_capacity(tasks.len());
    for (task, (tr, held)) in tasks.iter().zip(&splits) {
        accuracy.push(evaluate(cfg, &params, task, if held.is_empty() { tr } else { held })?);
    }
    let final_loss = trace.last().map_or(f64::NAN, |r| r.total);
    Ok(TrainOutcome { params, accuracy, trace, final_loss })
}
