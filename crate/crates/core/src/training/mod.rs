//! Losses, optimizer, learning-rate schedule, synthetic multi-task data and
//! the leave-one-subject-out evaluation protocol.

pub mod data;
pub mod loso;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod schedule;
pub mod toy;

pub use data::{apportion, generate_synthetic_tasks, Sample, SyntheticTask, TaskSpec};
pub use loso::{loso_split, run_loso, Classifier, Fold, FoldReport, LosoReport, NearestCentroid, ProbeConfig};
pub use loss::{label_smoothing_ce, multitask_loss, multitask_loss_grad, multitask_loss_tape, MultitaskMode};
pub use metrics::{argmax, classification_metrics, Metrics};
pub use optim::{adamw_step, AdamW, AdamWState};
pub use schedule::{cosine_lr, ScheduleConfig};
pub use toy::{evaluate, train_toy_multitask, write_trace, StepRecord, TrainConfig, TrainOutcome, MTL_WEIGHTS};
