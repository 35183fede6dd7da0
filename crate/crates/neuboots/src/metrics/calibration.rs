//! Calibration metrics: ECE, NLL, Brier score, error rate.

use serde::{Deserialize, Serialize};

use crate::generator::argmax;
use crate::matrix::Matrix;
use crate::nn::LOG_PROB_EPSILON;
use crate::{Error, Result};

/// Default number of equal-width confidence bins for ECE.
pub const DEFAULT_ECE_BINS: usize = 15;

fn validate_probs(probs: &Matrix, labels: &[usize]) -> Result<()> {
    if probs.rows() == 0 {
        return Err(Error::InvalidData("no predictions".into()));
    }
    if probs.rows() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} prediction rows but {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= probs.cols()) {
        return Err(Error::InvalidData(format!(
            "label {} out of range for {} classes",
            l,
            probs.cols()
        )));
    }
    for (i, row) in probs.iter_rows().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidData(format!(
                "probability row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Expected calibration error on equal-width confidence bins over `[0, 1]`.
///
/// Confidence is the max predicted probability; a prediction with confidence
/// exactly 1.0 falls into the last bin. Returned as a fraction in `[0, 1]`.
pub fn ece(probs: &Matrix, labels: &[usize], n_bins: usize) -> Result<f64> {
    validate_probs(probs, labels)?;
    if n_bins == 0 {
        return Err(Error::InvalidConfig("need at least one bin".into()));
    }
    let stats = bin_stats(probs, labels, n_bins);
    let m = probs.rows() as f64;
    Ok(stats
        .iter()
        .map(|b| (b.count as f64 / m) * (b.accuracy - b.mean_confidence).abs())
        .sum())
}

fn bin_stats(probs: &Matrix, labels: &[usize], n_bins: usize) -> Vec<BinStat> {
    let mut conf_sum = vec![0.0; n_bins];
    let mut correct = vec![0usize; n_bins];
    let mut count = vec![0usize; n_bins];
    for (row, &label) in probs.iter_rows().zip(labels) {
        let pred = argmax(row);
        let conf = row[pred];
        let bin = ((conf * n_bins as f64) as usize).min(n_bins - 1);
        conf_sum[bin] += conf;
        count[bin] += 1;
        if pred == label {
            correct[bin] += 1;
        }
    }
    (0..n_bins)
        .map(|b| BinStat {
            mean_confidence: if count[b] > 0 {
                conf_sum[b] / count[b] as f64
            } else {
                0.0
            },
            accuracy: if count[b] > 0 {
                correct[b] as f64 / count[b] as f64
            } else {
                0.0
            },
            count: count[b],
        })
        .collect()
}

/// Mean negative log probability of the true class, in nats. Probabilities
/// are floored at the cross-entropy clamp so the result is always finite.
pub fn nll(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    validate_probs(probs, labels)?;
    let m = probs.rows() as f64;
    Ok(probs
        .iter_rows()
        .zip(labels)
        .map(|(row, &l)| -(row[l].max(LOG_PROB_EPSILON)).ln())
        .sum::<f64>()
        / m)
}

/// Brier score: mean over samples of the squared gap to the one-hot target,
/// summed over classes. Uniform predictions score `(k-1)/k`.
pub fn brier(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    validate_probs(probs, labels)?;
    let m = probs.rows() as f64;
    Ok(probs
        .iter_rows()
        .zip(labels)
        .map(|(row, &l)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    let t = if k == l { 1.0 } else { 0.0 };
                    (p - t) * (p - t)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / m)
}

/// Fraction of samples whose argmax prediction (lowest index on ties) is
/// wrong.
pub fn error_rate(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    validate_probs(probs, labels)?;
    let wrong = probs
        .iter_rows()
        .zip(labels)
        .filter(|&(row, &l)| argmax(row) != l)
        .count();
    Ok(wrong as f64 / probs.rows() as f64)
}

/// Per-bin summary of the reliability diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub mean_confidence: f64,
    pub accuracy: f64,
    pub count: usize,
}

/// All calibration metrics for one prediction set. Error rate, ECE, and Brier
/// are reported in percent (Brier on the 0-200 scale of `100 * sum-of-squares`);
/// NLL stays in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub error_rate: f64,
    pub ece: f64,
    pub nll: f64,
    pub brier: f64,
    pub bin_stats: Vec<BinStat>,
}

/// Compute the full calibration report with `n_bins` ECE bins.
pub fn calibration_report(
    probs: &Matrix,
    labels: &[usize],
    n_bins: usize,
) -> Result<CalibrationReport> {
    Ok(CalibrationReport {
        error_rate: 100.0 * error_rate(probs, labels)?,
        ece: 100.0 * ece(probs, labels, n_bins)?,
        nll: nll(probs, labels)?,
        brier: 100.0 * brier(probs, labels)?,
        bin_stats: bin_stats(probs, labels, n_bins),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot_rows(labels: &[usize], k: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..k).map(|j| if j == l { 1.0 } else { 0.0 }).collect())
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn confident_and_correct_has_zero_ece() {
        let labels = vec![0, 1, 2, 1];
        let probs = one_hot_rows(&labels, 3);
        assert_eq!(ece(&probs, &labels, 15).unwrap(), 0.0);
    }

    #[test]
    fn single_bin_arithmetic() {
        // Binary, all confidence 0.9, accuracy 0.5: ECE = |0.5 - 0.9| = 0.4.
        let probs = Matrix::from_rows(&[vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        let labels = vec![0, 1];
        let e = ece(&probs, &labels, 15).unwrap();
        assert!((e - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_zero_everything() {
        let labels = vec![0, 1];
        let probs = one_hot_rows(&labels, 2);
        assert!(nll(&probs, &labels).unwrap() < 1e-10);
        assert_eq!(brier(&probs, &labels).unwrap(), 0.0);
        assert_eq!(error_rate(&probs, &labels).unwrap(), 0.0);
    }

    #[test]
    fn uniform_predictions_hit_analytic_values() {
        for k in [2usize, 3, 10] {
            let probs = Matrix::from_rows(&vec![vec![1.0 / k as f64; k]; 4]).unwrap();
            let labels = vec![0; 4];
            assert!((nll(&probs, &labels).unwrap() - (k as f64).ln()).abs() < 1e-12);
            let expected_brier = (k as f64 - 1.0) / k as f64;
            assert!((brier(&probs, &labels).unwrap() - expected_brier).abs() < 1e-12);
        }
    }

    #[test]
    fn four_sample_fixture_by_hand() {
        let probs = Matrix::from_rows(&[
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
            vec![0.25, 0.5, 0.25],
        ])
        .unwrap();
        let labels = vec![0, 2, 2, 1];
        // nll = -(ln .7 + ln .1 + ln .4 + ln .5)/4
        let expected_nll =
            -(0.7f64.ln() + 0.1f64.ln() + 0.4f64.ln() + 0.5f64.ln()) / 4.0;
        assert!((nll(&probs, &labels).unwrap() - expected_nll).abs() < 1e-12);
        // brier per row: r0: .09+.04+.01=.14; r1: .01+.64+.81=1.46;
        // r2: .09+.09+.36=.54; r3: .0625+.25+.0625=.375
        let expected_brier = (0.14 + 1.46 + 0.54 + 0.375) / 4.0;
        assert!((brier(&probs, &labels).unwrap() - expected_brier).abs() < 1e-12);
        // errors: row1 (argmax 1 != 2), row2 (argmax 2 == 2 correct)... rows 0,3 correct.
        assert!((error_rate(&probs, &labels).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn argmax_tie_breaks_to_lowest_index() {
        let probs = Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(error_rate(&probs, &[0]).unwrap(), 0.0);
        assert_eq!(error_rate(&probs, &[1]).unwrap(), 1.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        let probs = Matrix::zeros(0, 3);
        assert!(ece(&probs, &[], 15).is_err());
    }

    #[test]
    fn ece_invariant_under_class_relabeling() {
        let probs = Matrix::from_rows(&[
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.2, 0.7],
        ])
        .unwrap();
        let labels = vec![0, 2, 2];
        // Swap classes 0 and 2 everywhere.
        let swapped = Matrix::from_rows(&[
            vec![0.1, 0.3, 0.6],
            vec![0.3, 0.5, 0.2],
            vec![0.7, 0.2, 0.1],
        ])
        .unwrap();
        let swapped_labels = vec![2, 0, 0];
        let a = ece(&probs, &labels, 15).unwrap();
        let b = ece(&swapped, &swapped_labels, 15).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn shrinking_confidence_of_calibrated_set_raises_ece() {
        // Perfectly calibrated at confidence 1.0 and all correct; pulling
        // probabilities toward uniform leaves accuracy at 1 but confidence
        // below it, so ECE grows.
        let labels = vec![0, 1, 0, 1];
        let sharp = one_hot_rows(&labels, 2);
        let soft = Matrix::from_rows(&[
            vec![0.7, 0.3],
            vec![0.3, 0.7],
            vec![0.7, 0.3],
            vec![0.3, 0.7],
        ])
        .unwrap();
        let e_sharp = ece(&sharp, &labels, 15).unwrap();
        let e_soft = ece(&soft, &labels, 15).unwrap();
        assert_eq!(e_sharp, 0.0);
        assert!(e_soft > e_sharp);
    }
}
