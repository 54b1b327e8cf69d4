//! Ordinal-aware evaluation: MAE over class indices, Macro-F1, Accuracy,
//! Macro-Precision, Macro-Recall, plus the majority- and middle-class dummy
//! baselines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::LabelScale;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Row-indexed by truth, column-indexed by prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// The five reported metrics. MAE is a raw mean over ordinal index
/// distances; the others are percentages in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    /// Fixed-width row in the tables' column order:
    /// MAE, Macro-F1, Accuracy, Precision, Recall.
    pub fn table_row(&self, label: &str) -> String {
        format!(
            "{label:<24} {mae:>8.3} {f1:>9.2} {acc:>9.2} {prec:>10.2} {rec:>8.2}",
            mae = self.mae,
            f1 = self.macro_f1,
            acc = self.accuracy,
            prec = self.macro_precision,
            rec = self.macro_recall,
        )
    }

    pub fn table_header() -> String {
        format!(
            "{:<24} {:>8} {:>9} {:>9} {:>10} {:>8}",
            "model", "MAE", "Macro-F1", "Accuracy", "Precision", "Recall"
        )
    }
}

/// Compute all five metrics over ordinal predictions.
///
/// Per-class precision, recall, and F1 treat an empty denominator as 0, and
/// the macro averages run over every class of the scale, present in the
/// truths or not.
pub fn compute_metrics(
    preds: &[usize],
    truths: &[usize],
    scale: &LabelScale,
) -> Result<MetricsReport> {
    if preds.len() != truths.len() {
        return Err(EvalError::Shape(format!(
            "{} predictions vs {} truths",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(EvalError::Shape("no predictions to score".into()));
    }
    let c = scale.len();
    if let Some(&bad) = preds.iter().chain(truths).find(|&&i| i >= c) {
        return Err(EvalError::Shape(format!("ordinal index {bad} out of range for {c} classes")));
    }

    let mut cm = ConfusionMatrix::new(c);
    let mut abs_err = 0.0;
    let mut correct = 0u64;
    for (&p, &t) in preds.iter().zip(truths) {
        cm.counts[t][p] += 1;
        abs_err += (p as f64 - t as f64).abs();
        if p == t {
            correct += 1;
        }
    }
    let n = preds.len() as f64;

    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for k in 0..c {
        let tp = cm.counts[k][k] as f64;
        let pred_k: f64 = (0..c).map(|t| cm.counts[t][k] as f64).sum();
        let true_k: f64 = (0..c).map(|p| cm.counts[k][p] as f64).sum();
        let precision = if pred_k > 0.0 { tp / pred_k } else { 0.0 };
        let recall = if true_k > 0.0 { tp / true_k } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        precision_sum += precision;
        recall_sum += recall;
        f1_sum += f1;
    }
    let cf = c as f64;
    Ok(MetricsReport {
        mae: abs_err / n,
        macro_f1: 100.0 * f1_sum / cf,
        accuracy: 100.0 * correct as f64 / n,
        macro_precision: 100.0 * precision_sum / cf,
        macro_recall: 100.0 * recall_sum / cf,
        confusion: cm,
    })
}

/// Dummy baseline: predict the training majority class (ties to the lowest
/// ordinal) for every test item.
pub fn majority_baseline(
    train_truths: &[usize],
    test_truths: &[usize],
    scale: &LabelScale,
) -> Result<MetricsReport> {
    if train_truths.is_empty() {
        return Err(EvalError::Shape("empty training labels for majority baseline".into()));
    }
    let mut counts = vec![0usize; scale.len()];
    for &t in train_truths {
        if t >= scale.len() {
            return Err(EvalError::Shape(format!("train label {t} out of range")));
        }
        counts[t] += 1;
    }
    let mut majority = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[majority] {
            majority = i;
        }
    }
    let preds = vec![majority; test_truths.len()];
    compute_metrics(&preds, test_truths, scale)
}

/// Dummy baseline: predict the middle class, index `floor(C / 2)`.
pub fn middle_baseline(test_truths: &[usize], scale: &LabelScale) -> Result<MetricsReport> {
    let middle = scale.len() / 2;
    let preds = vec![middle; test_truths.len()];
    compute_metrics(&preds, test_truths, scale)
}
