//! One-vs-rest per-class F1.

use crate::{Error, Result};

/// Per-class F1 scores from hard predictions.
///
/// For each class: precision = TP/(TP+FP), recall = TP/(TP+FN), F1 their
/// harmonic mean. Whenever TP = 0 the score is 0 — this covers classes that
/// are never predicted, absent from the truth, or both (the empty-class
/// convention).
pub fn per_class_f1(predictions: &[usize], labels: &[usize], k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidConfig("need at least two classes".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions but {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::InvalidData("no predictions".into()));
    }
    if let Some(&v) = predictions.iter().chain(labels).find(|&&v| v >= k) {
        return Err(Error::InvalidData(format!(
            "class index {v} out of range for k = {k}"
        )));
    }

    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fnc = vec![0usize; k];
    for (&p, &l) in predictions.iter().zip(labels) {
        if p == l {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnc[l] += 1;
        }
    }
    Ok((0..k)
        .map(|c| {
            if tp[c] == 0 {
                0.0
            } else {
                let precision = tp[c] as f64 / (tp[c] + fp[c]) as f64;
                let recall = tp[c] as f64 / (tp[c] + fnc[c]) as f64;
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let f1 = per_class_f1(&labels, &labels, 3).unwrap();
        assert_eq!(f1, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        // Class 2 present in truth but never predicted.
        let predictions = vec![0, 0, 1, 1];
        let labels = vec![0, 0, 1, 2];
        let f1 = per_class_f1(&predictions, &labels, 3).unwrap();
        assert_eq!(f1[2], 0.0);
        assert!(f1[0] > 0.0 && f1[1] > 0.0);
    }

    #[test]
    fn nine_sample_fixture_matches_hand_confusion() {
        // Confusion by hand (rows = truth, cols = prediction):
        //   truth 0: predicted 0,0,1      -> tp0 = 2, fn0 = 1
        //   truth 1: predicted 1,2,1      -> tp1 = 2, fn1 = 1
        //   truth 2: predicted 2,0,2      -> tp2 = 2, fn2 = 1
        // fp: class 0 gets one (from truth 2), class 1 one (truth 0),
        //     class 2 one (truth 1).
        // Every class: P = 2/3, R = 2/3, F1 = 2/3.
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let predictions = vec![0, 0, 1, 1, 2, 1, 2, 0, 2];
        let f1 = per_class_f1(&predictions, &labels, 3).unwrap();
        for v in f1 {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn k_below_two_rejected() {
        assert!(per_class_f1(&[0], &[0], 1).is_err());
    }
}
