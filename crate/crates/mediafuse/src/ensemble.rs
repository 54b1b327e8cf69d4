//! Hard and soft voting: aggregate article-level class-probability vectors
//! into outlet-level predictions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::core::LabelScale;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no predictions to vote over")]
    NoPredictions,
    #[error("prediction vector has {got} entries, scale has {want} classes")]
    Shape { got: usize, want: usize },
}

pub type Result<T> = std::result::Result<T, EnsembleError>;

/// Granularity of a prediction set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionUnit {
    Article,
    Outlet,
}

/// A batch of predictions at one granularity; each item pairs an id with a
/// class-probability vector over the scale.
#[derive(Debug, Clone)]
pub struct PredictionSet {
    pub unit: PredictionUnit,
    pub items: Vec<(String, Vec<f64>)>,
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn check(preds: &[Vec<f64>], scale: &LabelScale) -> Result<()> {
    if preds.is_empty() {
        return Err(EnsembleError::NoPredictions);
    }
    for p in preds {
        if p.len() != scale.len() {
            return Err(EnsembleError::Shape { got: p.len(), want: scale.len() });
        }
    }
    Ok(())
}

/// Majority vote over per-item argmaxes; ties break to the lowest ordinal
/// index.
pub fn hard_vote(preds: &[Vec<f64>], scale: &LabelScale) -> Result<usize> {
    check(preds, scale)?;
    let mut counts = vec![0usize; scale.len()];
    for p in preds {
        counts[argmax(p)] += 1;
    }
    let mut winner = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[winner] {
            winner = i;
        }
    }
    Ok(winner)
}

/// Elementwise mean of the probability vectors, re-normalized to sum 1;
/// returns the argmax of the mean (ties to the lowest ordinal) and the
/// mean itself.
pub fn soft_vote(preds: &[Vec<f64>], scale: &LabelScale) -> Result<(usize, Vec<f64>)> {
    check(preds, scale)?;
    let mut mean = vec![0.0; scale.len()];
    for p in preds {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let n = preds.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    let sum: f64 = mean.iter().sum();
    if sum > 0.0 {
        for m in &mut mean {
            *m /= sum;
        }
    }
    Ok((argmax(&mean), mean))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteMode {
    Hard,
    Soft,
}

impl VoteMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hard" => Some(VoteMode::Hard),
            "soft" => Some(VoteMode::Soft),
            _ => None,
        }
    }
}

/// Collapse article-level predictions (grouped by outlet) into one
/// prediction per outlet. Outlets that arrive with zero articles are listed
/// in the returned report rather than silently dropped.
pub fn outlet_aggregate(
    article_preds: &BTreeMap<String, Vec<Vec<f64>>>,
    mode: VoteMode,
    scale: &LabelScale,
) -> Result<(PredictionSet, Vec<String>)> {
    let mut items = Vec::new();
    let mut empty: Vec<String> = Vec::new();
    for (outlet, preds) in article_preds {
        if preds.is_empty() {
            empty.push(outlet.clone());
            continue;
        }
        let probs = match mode {
            VoteMode::Hard => {
                let winner = hard_vote(preds, scale)?;
                let mut one_hot = vec![0.0; scale.len()];
                one_hot[winner] = 1.0;
                one_hot
            }
            VoteMode::Soft => soft_vote(preds, scale)?.1,
        };
        items.push((outlet.clone(), probs));
    }
    Ok((PredictionSet { unit: PredictionUnit::Outlet, items }, empty))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale2() -> LabelScale {
        LabelScale::new("pair", &["a", "b"])
    }

    #[test]
    fn hard_vote_majority() {
        let scale = LabelScale::bias3();
        let preds = vec![
            vec![0.9, 0.1, 0.0],
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
        ];
        assert_eq!(hard_vote(&preds, &scale).unwrap(), 0);
    }

    #[test]
    fn hard_vote_tie_takes_lower_ordinal() {
        let scale = scale2();
        let preds = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        assert_eq!(hard_vote(&preds, &scale).unwrap(), 0);
    }

    #[test]
    fn hard_vote_single_prediction_passthrough() {
        let scale = scale2();
        assert_eq!(hard_vote(&[vec![0.2, 0.8]], &scale).unwrap(), 1);
    }

    #[test]
    fn hard_vote_invariant_to_duplication() {
        let scale = LabelScale::bias3();
        let preds =
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.7, 0.2], vec![0.4, 0.35, 0.25]];
        let once = hard_vote(&preds, &scale).unwrap();
        let doubled: Vec<Vec<f64>> = preds.iter().chain(&preds).cloned().collect();
        assert_eq!(hard_vote(&doubled, &scale).unwrap(), once);
    }

    #[test]
    fn soft_vote_symmetric_pair_ties_low() {
        let scale = scale2();
        let (winner, mean) = soft_vote(&[vec![0.6, 0.4], vec![0.4, 0.6]], &scale).unwrap();
        assert_eq!(winner, 0);
        assert!((mean[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_vote_identical_vectors_is_idempotent() {
        let scale = scale2();
        let v = vec![0.3, 0.7];
        let (_, mean) = soft_vote(&[v.clone(), v.clone()], &scale).unwrap();
        for (a, b) in mean.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_vote_arithmetic_case() {
        let scale = scale2();
        let (winner, mean) = soft_vote(&[vec![0.9, 0.1], vec![0.2, 0.8]], &scale).unwrap();
        assert_eq!(winner, 0);
        assert!((mean[0] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn soft_vote_argmax_invariant_to_positive_scaling() {
        let scale = LabelScale::bias3();
        let preds = vec![vec![0.5, 0.3, 0.2], vec![0.2, 0.5, 0.3]];
        let (winner, _) = soft_vote(&preds, &scale).unwrap();
        let scaled: Vec<Vec<f64>> =
            preds.iter().map(|p| p.iter().map(|v| v * 3.5).collect()).collect();
        let (winner_scaled, mean) = soft_vote(&scaled, &scale).unwrap();
        assert_eq!(winner, winner_scaled);
        let sum: f64 = mean.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_an_error() {
        let scale = scale2();
        assert!(matches!(hard_vote(&[], &scale), Err(EnsembleError::NoPredictions)));
        assert!(matches!(soft_vote(&[], &scale), Err(EnsembleError::NoPredictions)));
    }

    #[test]
    fn outlet_aggregate_groups_and_reports_empties() {
        let scale = scale2();
        let mut grouped: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        grouped.insert("a.com".into(), vec![vec![0.9, 0.1]; 5]);
        grouped.insert("b.com".into(), vec![vec![0.2, 0.8]]);
        grouped.insert("empty.com".into(), vec![]);
        let (set, missing) = outlet_aggregate(&grouped, VoteMode::Soft, &scale).unwrap();
        assert_eq!(set.items.len(), 2);
        assert_eq!(missing, vec!["empty.com".to_string()]);
        // identical article vectors collapse to that vector
        assert!((set.items[0].1[0] - 0.9).abs() < 1e-12);
        // single-article outlet passes through
        assert!((set.items[1].1[1] - 0.8).abs() < 1e-12);
    }
}
