//! Out-of-distribution statistics, the logistic detector, and detection
//! metrics.

use serde::{Deserialize, Serialize};

use super::logistic::{fit_logistic, predict_logistic};
use crate::generator::PredictionEnsemble;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// The four per-input uncertainty statistics fed to the detector: max of the
/// predictive mean, mean logit standard deviation, expected entropy, and
/// predictive entropy (natural log).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OodFeatures {
    pub max_predictive_mean: f64,
    pub logit_std: f64,
    pub expected_entropy: f64,
    pub predictive_entropy: f64,
}

impl OodFeatures {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.max_predictive_mean,
            self.logit_std,
            self.expected_entropy,
            self.predictive_entropy,
        ]
    }
}

fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

/// Uncertainty statistics for one input from its `B`-sample ensemble and the
/// matching raw logits (`B x k` each).
///
/// `logit_std` is the mean over classes of the population standard deviation
/// across samples.
pub fn ood_features(ensemble: &PredictionEnsemble, logits: &Matrix) -> Result<OodFeatures> {
    let b = ensemble.size();
    if b < 2 {
        return Err(Error::InvalidData(
            "ood features need at least two samples".into(),
        ));
    }
    if logits.rows() != b || logits.cols() != ensemble.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "logits {}x{} for an ensemble of {}x{}",
            logits.rows(),
            logits.cols(),
            b,
            ensemble.output_dim()
        )));
    }

    let mean_probs = ensemble.mean();
    let max_predictive_mean = mean_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let logit_means = logits.column_means();
    let k = logits.cols();
    let mut var = vec![0.0; k];
    for row in logits.iter_rows() {
        for ((v, &x), m) in var.iter_mut().zip(row).zip(&logit_means) {
            let d = x - m;
            *v += d * d;
        }
    }
    let logit_std = var
        .iter()
        .map(|v| (v / b as f64).sqrt())
        .sum::<f64>()
        / k as f64;

    let expected_entropy = ensemble
        .samples()
        .iter_rows()
        .map(entropy)
        .sum::<f64>()
        / b as f64;
    let predictive_entropy = entropy(&mean_probs);

    Ok(OodFeatures {
        max_predictive_mean,
        logit_std,
        expected_entropy,
        predictive_entropy,
    })
}

/// Standardization parameters learned on the fitting split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; 4],
    pub std: [f64; 4],
}

impl Standardizer {
    fn apply(&self, f: &[f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = (f[i] - self.mean[i]) / self.std[i];
        }
        out
    }
}

/// Logistic-regression OOD detector over the four uncertainty statistics.
/// Scores are the predicted in-distribution probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub weights: [f64; 4],
    pub bias: f64,
    pub standardizer: Standardizer,
    pub iterations: usize,
    pub regularization: f64,
}

impl DetectorModel {
    /// Predicted probability that the input is in-distribution.
    pub fn score(&self, features: &OodFeatures) -> f64 {
        let z = self.standardizer.apply(&features.as_array());
        predict_logistic(&self.weights, self.bias, &z)
    }
}

/// Regularization strength of the detector fit.
pub const DETECTOR_LAMBDA: f64 = 1e-4;
/// Newton iteration cap.
pub const DETECTOR_MAX_ITER: usize = 100;
/// Gradient-norm stopping tolerance.
pub const DETECTOR_GRAD_TOL: f64 = 1e-8;

/// Fit the detector on labeled feature sets (in-distribution = positive).
/// Features are standardized to zero mean and unit variance on the pooled
/// fitting split before the Newton solve.
pub fn fit_detector(
    features_in: &[OodFeatures],
    features_out: &[OodFeatures],
) -> Result<DetectorModel> {
    if features_in.is_empty() || features_out.is_empty() {
        return Err(Error::InvalidData(
            "both in- and out-of-distribution features are required".into(),
        ));
    }
    let rows: Vec<[f64; 4]> = features_in
        .iter()
        .chain(features_out)
        .map(OodFeatures::as_array)
        .collect();
    let m = rows.len() as f64;
    let mut mean = [0.0; 4];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for v in &mut mean {
        *v /= m;
    }
    let mut std = [0.0; 4];
    for r in &rows {
        for ((s, v), mu) in std.iter_mut().zip(r).zip(&mean) {
            let d = v - mu;
            *s += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / m).sqrt();
        if *s < 1e-12 {
            // Constant feature: standardized to zero, weight stays near zero
            // through the regularizer.
            *s = 1.0;
        }
    }
    let standardizer = Standardizer { mean, std };

    let standardized: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| standardizer.apply(r).to_vec())
        .collect();
    let x = Matrix::from_rows(&standardized)?;
    let y: Vec<f64> = std::iter::repeat_n(1.0, features_in.len())
        .chain(std::iter::repeat_n(0.0, features_out.len()))
        .collect();

    let fit = fit_logistic(&x, &y, DETECTOR_LAMBDA, DETECTOR_MAX_ITER, DETECTOR_GRAD_TOL)?;
    Ok(DetectorModel {
        weights: [fit.weights[0], fit.weights[1], fit.weights[2], fit.weights[3]],
        bias: fit.bias,
        standardizer,
        iterations: fit.iterations,
        regularization: DETECTOR_LAMBDA,
    })
}

/// Threshold-sweep detection metrics. In-distribution is the positive class
/// and higher scores mean "more in-distribution".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// True negative rate at the highest threshold keeping TPR >= 0.95.
    pub tnr_at_tpr95: f64,
    /// Area under the ROC curve (trapezoid over unique thresholds).
    pub auroc: f64,
    /// Area under precision-recall, in-distribution as positive.
    pub aupr_in: f64,
    /// Area under precision-recall, out-of-distribution as positive.
    pub aupr_out: f64,
    /// Max over thresholds of (TPR + TNR) / 2.
    pub detection_accuracy: f64,
}

/// Compute all detection metrics from the two score sets.
pub fn detection_metrics(scores_in: &[f64], scores_out: &[f64]) -> Result<DetectionMetrics> {
    if scores_in.is_empty() || scores_out.is_empty() {
        return Err(Error::InvalidData("both score sets must be nonempty".into()));
    }
    let sweep = sweep_points(scores_in, scores_out);

    let mut auroc = 0.0;
    let mut best_acc: f64 = 0.0;
    let mut tnr_at_tpr95 = 0.0;
    let mut prev = (0.0, 0.0); // (fpr, tpr), threshold above max score
    for &(tpr, fpr) in &sweep.curve {
        auroc += 0.5 * (tpr + prev.1) * (fpr - prev.0);
        best_acc = best_acc.max(0.5 * (tpr + (1.0 - fpr)));
        prev = (fpr, tpr);
    }
    // Highest threshold with TPR >= 0.95 maximizes TNR on the feasible set
    // because TNR is non-increasing along the sweep.
    for &(tpr, fpr) in &sweep.curve {
        if tpr >= 0.95 {
            tnr_at_tpr95 = 1.0 - fpr;
            break;
        }
    }

    Ok(DetectionMetrics {
        tnr_at_tpr95,
        auroc,
        aupr_in: aupr(scores_in, scores_out),
        aupr_out: aupr(
            &scores_out.iter().map(|s| -s).collect::<Vec<_>>(),
            &scores_in.iter().map(|s| -s).collect::<Vec<_>>(),
        ),
        detection_accuracy: best_acc,
    })
}

struct Sweep {
    /// (TPR, FPR) at each unique threshold, swept from +inf downward; ends at
    /// (1, 1).
    curve: Vec<(f64, f64)>,
}

/// Points of the ROC sweep over unique score thresholds (descending), with
/// "positive" meaning `score >= threshold`.
fn sweep_points(pos: &[f64], neg: &[f64]) -> Sweep {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("non-finite score"));
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let mut curve = Vec::new();
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        curve.push((tp / np, fp / nn));
    }
    Sweep { curve }
}

/// Area under the precision-recall curve by trapezoid over unique-threshold
/// sweep points, with `pos` as the positive class.
fn aupr(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("non-finite score"));
    let np = pos.len() as f64;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut points: Vec<(f64, f64)> = Vec::new(); // (recall, precision)
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((tp / np, tp / (tp + fp)));
    }
    let mut area = 0.0;
    let mut prev = match points.first() {
        // Anchor at recall 0 with the first achievable precision.
        Some(&(_, p)) => (0.0, p),
        None => return 0.0,
    };
    for &(r, p) in &points {
        area += 0.5 * (p + prev.1) * (r - prev.0);
        prev = (r, p);
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ensemble_of(rows: &[Vec<f64>]) -> PredictionEnsemble {
        PredictionEnsemble::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn identical_samples_have_zero_logit_std_and_equal_entropies() {
        let probs = vec![vec![0.7, 0.3]; 4];
        let logits = Matrix::from_rows(&vec![vec![1.2, 0.3]; 4]).unwrap();
        let f = ood_features(&ensemble_of(&probs), &logits).unwrap();
        assert_eq!(f.logit_std, 0.0);
        assert!((f.expected_entropy - f.predictive_entropy).abs() < 1e-12);
    }

    #[test]
    fn two_sample_binary_fixture_by_hand() {
        // Samples: (0.8, 0.2) and (0.4, 0.6); logits (1.0, 0.0) / (0.0, 1.0).
        let probs = vec![vec![0.8, 0.2], vec![0.4, 0.6]];
        let logits = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = ood_features(&ensemble_of(&probs), &logits).unwrap();
        // mean probs = (0.6, 0.4), max = 0.6
        assert!((f.max_predictive_mean - 0.6).abs() < 1e-12);
        // per-class logit std (population): both classes have values {1,0} ->
        // mean 0.5, var 0.25, std 0.5; mean over classes = 0.5.
        assert!((f.logit_std - 0.5).abs() < 1e-12);
        let h = |p: f64| -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        let expected_ee = 0.5 * (h(0.8) + h(0.4));
        assert!((f.expected_entropy - expected_ee).abs() < 1e-12);
        assert!((f.predictive_entropy - h(0.6)).abs() < 1e-12);
    }

    #[test]
    fn jensen_gap_is_nonnegative_on_random_ensembles() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(77);
        for _ in 0..200 {
            let b = rng.random_range(2..12);
            let k = rng.random_range(2..6);
            let rows: Vec<Vec<f64>> = (0..b)
                .map(|_| {
                    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                    let sum: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / sum).collect()
                })
                .collect();
            let logits = Matrix::from_rows(
                &(0..b)
                    .map(|_| (0..k).map(|_| rng.random_range(-3.0..3.0)).collect())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            let f = ood_features(&ensemble_of(&rows), &logits).unwrap();
            assert!(f.predictive_entropy >= f.expected_entropy - 1e-12);
            assert!(f.expected_entropy >= 0.0);
            assert!(f.max_predictive_mean > 0.0 && f.max_predictive_mean <= 1.0);
        }
    }

    fn feat(v: f64) -> OodFeatures {
        OodFeatures {
            max_predictive_mean: v,
            logit_std: 0.1 * v,
            expected_entropy: 1.0 - v,
            predictive_entropy: 1.1 - v,
        }
    }

    #[test]
    fn separable_detector_reaches_perfect_auroc() {
        let fin: Vec<OodFeatures> = (0..20).map(|i| feat(0.8 + 0.01 * i as f64)).collect();
        let fout: Vec<OodFeatures> = (0..20).map(|i| feat(0.2 + 0.01 * i as f64)).collect();
        let det = fit_detector(&fin, &fout).unwrap();
        let s_in: Vec<f64> = fin.iter().map(|f| det.score(f)).collect();
        let s_out: Vec<f64> = fout.iter().map(|f| det.score(f)).collect();
        let m = detection_metrics(&s_in, &s_out).unwrap();
        assert_eq!(m.auroc, 1.0);
        assert_eq!(m.tnr_at_tpr95, 1.0);
        assert_eq!(m.detection_accuracy, 1.0);
    }

    #[test]
    fn mirrored_detector_features_give_zero_bias() {
        let fin: Vec<OodFeatures> = (1..=10).map(|i| feat(0.1 * i as f64)).collect();
        let fout: Vec<OodFeatures> = (1..=10).map(|i| feat(-0.1 * i as f64)).collect();
        let det = fit_detector(&fin, &fout).unwrap();
        assert!(det.bias.abs() < 1e-6, "bias = {}", det.bias);
    }

    #[test]
    fn identical_scores_give_half_auroc() {
        let s = vec![0.5; 40];
        let m = detection_metrics(&s, &s).unwrap();
        assert!((m.auroc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn six_point_fixture_matches_exhaustive_sweep() {
        // Brute-force oracle: enumerate every candidate threshold midpoint.
        let s_in = vec![0.9, 0.8, 0.7, 0.4];
        let s_out = vec![0.75, 0.6, 0.3, 0.1];
        let m = detection_metrics(&s_in, &s_out).unwrap();

        // Exhaustive threshold set: all score values plus sentinels.
        let mut thresholds: Vec<f64> = s_in.iter().chain(&s_out).copied().collect();
        thresholds.push(f64::NEG_INFINITY);
        thresholds.push(f64::INFINITY);
        thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let tpr = |t: f64| s_in.iter().filter(|&&s| s >= t).count() as f64 / s_in.len() as f64;
        let fpr = |t: f64| s_out.iter().filter(|&&s| s >= t).count() as f64 / s_out.len() as f64;

        // Brute AUROC via trapezoid over sorted unique (fpr, tpr).
        let mut pts: Vec<(f64, f64)> = thresholds.iter().map(|&t| (fpr(t), tpr(t))).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut brute_auroc = 0.0;
        for w in pts.windows(2) {
            brute_auroc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        }
        assert!((m.auroc - brute_auroc).abs() < 1e-12);

        let brute_acc = thresholds
            .iter()
            .map(|&t| 0.5 * (tpr(t) + 1.0 - fpr(t)))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((m.detection_accuracy - brute_acc).abs() < 1e-12);

        let brute_tnr95 = thresholds
            .iter()
            .filter(|&&t| tpr(t) >= 0.95)
            .map(|&t| 1.0 - fpr(t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((m.tnr_at_tpr95 - brute_tnr95).abs() < 1e-12);
    }

    proptest! {
        // AUROC is invariant under strictly monotone transforms of scores.
        #[test]
        fn auroc_invariant_under_monotone_transform(seed in 0u64..200) {
            use rand::Rng;
            let mut rng = crate::rng::seeded_rng(seed);
            let s_in: Vec<f64> = (0..15).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s_out: Vec<f64> = (0..12).map(|_| rng.random_range(-2.5..1.5)).collect();
            let a = detection_metrics(&s_in, &s_out).unwrap().auroc;
            let t = |v: f64| (3.0 * v).tanh() * 10.0 + v; // strictly increasing
            let ti: Vec<f64> = s_in.iter().map(|&v| t(v)).collect();
            let to: Vec<f64> = s_out.iter().map(|&v| t(v)).collect();
            let b = detection_metrics(&ti, &to).unwrap().auroc;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
