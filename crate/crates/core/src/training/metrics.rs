use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Accuracy with macro-averaged recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Metrics {
    pub fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len().max(1) as f64;
        Metrics {
            accuracy: all.iter().map(|m| m.accuracy).sum::<f64>() / n,
            recall: all.iter().map(|m| m.recall).sum::<f64>() / n,
            f1: all.iter().map(|m| m.f1).sum::<f64>() / n,
        }
    }
}

/// Index of the largest value; the first wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Macro averages run over the classes present in `truth` or `pred`; a
/// class with no predictions has precision 0.
pub fn classification_metrics(truth: &[usize], pred: &[usize], classes: usize) -> Result<Metrics> {
    ensure(!truth.is_empty() && truth.len() == pred.len(), || {
        format!("{} labels against {} predictions", truth.len(), pred.len())
    })?;
    ensure(truth.iter().chain(pred).all(|&c| c < classes), || format!("label outside {classes} classes"))?;
    let mut tp = vec![0usize; classes];
    let mut support = vec![0usize; classes];
    let mut predicted = vec![0usize; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        support[t] += 1;
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let present: Vec<usize> = (0..classes).filter(|&c| support[c] + predicted[c] > 0).collect();
    let mut recall = 0.0;
    let mut f1 = 0.0;
    for &c in &present {
        let r = ratio(tp[c], support[c]);
        let p = ratio(tp[c], predicted[c]);
        recall += r;
        f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = present.len() as f64;
    Ok(Metrics { accuracy: ratio(tp.iter().sum(), truth.len()), recall: recall / k, f1: f1 / k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_hand_computed() {
        let m = classification_metrics(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(m, Metrics { accuracy: 1.0, recall: 1.0, f1: 1.0 });
        // class 0: tp 1, support 2, predicted 1; class 1: tp 1, support 1, predicted 2
        let m = classification_metrics(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert!((m.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 0.75).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
