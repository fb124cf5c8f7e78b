use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::kernel::ops::smoothed_cross_entropy;
use crate::kernel::{Scalar, Tape, Var};

/// Cross-entropy against a target that puts `1 - eps` on the true class and
/// spreads `eps` evenly over the other `K - 1`.
pub fn label_smoothing_ce<T: Scalar>(logits: &[T], target: usize, eps: T) -> Result<T> {
    smoothed_cross_entropy(logits, target, eps).map(|(loss, _)| loss)
}

/// How learned task weights enter the aggregate loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultitaskMode {
    /// `sum_i exp(-w_i) L_i + w_i`, bounded below with its minimum at
    /// `w_i = ln L_i`.
    #[default]
    Standard,
    /// `sum_i exp(w_i) L_i + w_i`. Increasing in every `w_i`, so it has no
    /// minimum; kept for comparison only.
    Verbatim,
}

impl MultitaskMode {
    fn sign(self) -> f64 {
        match self {
            MultitaskMode::Standard => -1.0,
            MultitaskMode::Verbatim => 1.0,
        }
    }
}

fn check_lengths(losses: &[f64], w: &[f64]) -> Result<()> {
    ensure(!losses.is_empty() && losses.len() == w.len(), || {
        format!("{} task losses against {} task weights", losses.len(), w.len())
    })
}

pub fn multitask_loss(losses: &[f64], w: &[f64], mode: MultitaskMode) -> Result<f64> {
    check_lengths(losses, w)?;
    let s = mode.sign();
    Ok(losses.iter().zip(w).map(|(&l, &wi)| (s * wi).exp() * l + wi).sum())
}

/// Closed-form `(dJ/dw, dJ/dL)` of [`multitask_loss`].
pub fn multitask_loss_grad(losses: &[f64], w: &[f64], mode: MultitaskMode) -> Result<(Vec<f64>, Vec<f64>)> {
    check_lengths(losses, w)?;
    let s = mode.sign();
    let dl: Vec<f64> = w.iter().map(|&wi| (s * wi).exp()).collect();
    let dw = losses.iter().zip(&dl).map(|(&l, &e)| s * e * l + 1.0).collect();
    Ok((dw, dl))
}

/// [`multitask_loss`] on the tape; `losses` and `w` are both `[T]`.
pub fn multitask_loss_tape<T: Scalar>(tape: &mut Tape<'_, T>, losses: Var, w: Var, mode: MultitaskMode) -> Result<Var> {
    ensure(tape.shape(losses).len() == 1 && tape.shape(losses) == tape.shape(w), || {
        format!("task losses {:?} and weights {:?} must be matching vectors", tape.shape(losses), tape.shape(w))
    })?;
    let signed = tape.scale(w, T::lit(mode.sign()));
    let factor = tape.exp(signed);
    let weighted = tape.mul(factor, losses)?;
    let terms = tape.add(weighted, w)?;
    Ok(tape.sum(terms))
}
