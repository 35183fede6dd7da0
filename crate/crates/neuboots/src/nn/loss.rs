//! Weighted losses and their output-side gradients.
//!
//! The training objective everywhere in this crate is the weighted mean
//! `(1/m) * sum_i w_i * l(f(x_i), y_i)`; with unit weights it reduces to the
//! plain mean loss, and it is homogeneous of degree one in the weights.

use serde::{Deserialize, Serialize};

use super::net::{OutputHead, softmax_backward_row};
use crate::data::Targets;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Floor applied to predicted probabilities inside `ln`, so a zero-probability
/// true class yields a large finite loss instead of infinity.
pub const LOG_PROB_EPSILON: f64 = 1e-12;

/// Supported per-sample losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error summed over output dimensions. Real targets.
    Mse,
    /// Negative log probability of the true class. Class targets.
    CrossEntropy,
    /// Squared gap to the one-hot target summed over classes. Class targets.
    Brier,
}

/// Per-sample losses `l_i` for a batch of outputs (post output-head).
pub fn per_sample_losses(outputs: &Matrix, targets: &Targets, kind: LossKind) -> Result<Vec<f64>> {
    let m = outputs.rows();
    if targets.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} output rows but {} targets",
            m,
            targets.len()
        )));
    }
    match (kind, targets) {
        (LossKind::Mse, Targets::Real(y)) => {
            if y.cols() != outputs.cols() {
                return Err(Error::DimensionMismatch(format!(
                    "output width {} vs target width {}",
                    outputs.cols(),
                    y.cols()
                )));
            }
            Ok(outputs
                .iter_rows()
                .zip(y.iter_rows())
                .map(|(o, t)| o.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect())
        }
        (LossKind::CrossEntropy, Targets::Class(labels)) => Ok(outputs
            .iter_rows()
            .zip(labels)
            .map(|(p, &c)| -(p[c].max(LOG_PROB_EPSILON)).ln())
            .collect()),
        (LossKind::Brier, Targets::Class(labels)) => Ok(outputs
            .iter_rows()
            .zip(labels)
            .map(|(p, &c)| {
                p.iter()
                    .enumerate()
                    .map(|(k, &pk)| {
                        let t = if k == c { 1.0 } else { 0.0 };
                        (pk - t) * (pk - t)
                    })
                    .sum()
            })
            .collect()),
        (LossKind::Mse, Targets::Class(_)) => Err(Error::InvalidConfig(
            "mse loss requires real-valued targets".into(),
        )),
        (_, Targets::Real(_)) => Err(Error::InvalidConfig(
            "cross_entropy and brier require class targets".into(),
        )),
    }
}

/// Weighted mean loss `(1/m) sum_i w_i l_i`.
pub fn weighted_loss(
    outputs: &Matrix,
    targets: &Targets,
    weights: &[f64],
    kind: LossKind,
) -> Result<f64> {
    let losses = per_sample_losses(outputs, targets, kind)?;
    if weights.len() != losses.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} losses but {} weights",
            losses.len(),
            weights.len()
        )));
    }
    let m = losses.len() as f64;
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / m)
}

/// Gradient of the weighted mean loss with respect to the network's last
/// post-activation output (pre output-head), with `w_i/m` folded in.
pub(crate) fn loss_output_grad(
    outputs: &Matrix,
    head: OutputHead,
    targets: &Targets,
    weights: &[f64],
    kind: LossKind,
) -> Result<Matrix> {
    let m = outputs.rows();
    let k = outputs.cols();
    let inv_m = 1.0 / m as f64;
    let mut d = Matrix::zeros(m, k);
    match (head, kind, targets) {
        (OutputHead::Identity, LossKind::Mse, Targets::Real(y)) => {
            for ((dr, o), (t, &w)) in d
                .iter_rows_mut()
                .zip(outputs.iter_rows())
                .zip(y.iter_rows().zip(weights))
            {
                let c = w * inv_m;
                for ((dv, &ov), &tv) in dr.iter_mut().zip(o).zip(t) {
                    *dv = 2.0 * (ov - tv) * c;
                }
            }
        }
        (OutputHead::Softmax, LossKind::CrossEntropy, Targets::Class(labels)) => {
            // d/dz of -ln softmax(z)_c is p - onehot(c).
            for ((dr, p), (&c, &w)) in d
                .iter_rows_mut()
                .zip(outputs.iter_rows())
                .zip(labels.iter().zip(weights))
            {
                let s = w * inv_m;
                for (j, (dv, &pv)) in dr.iter_mut().zip(p).enumerate() {
                    let t = if j == c { 1.0 } else { 0.0 };
                    *dv = (pv - t) * s;
                }
            }
        }
        (OutputHead::Softmax, LossKind::Brier, Targets::Class(labels)) => {
            let mut dp = vec![0.0; k];
            for ((dr, p), (&c, &w)) in d
                .iter_rows_mut()
                .zip(outputs.iter_rows())
                .zip(labels.iter().zip(weights))
            {
                let s = w * inv_m;
                for (j, (dpj, &pv)) in dp.iter_mut().zip(p).enumerate() {
                    let t = if j == c { 1.0 } else { 0.0 };
                    *dpj = 2.0 * (pv - t) * s;
                }
                softmax_backward_row(&dp, p, dr);
            }
        }
        (OutputHead::Identity, LossKind::Brier, Targets::Class(labels)) => {
            for ((dr, o), (&c, &w)) in d
                .iter_rows_mut()
                .zip(outputs.iter_rows())
                .zip(labels.iter().zip(weights))
            {
                let s = w * inv_m;
                for (j, (dv, &ov)) in dr.iter_mut().zip(o).enumerate() {
                    let t = if j == c { 1.0 } else { 0.0 };
                    *dv = 2.0 * (ov - t) * s;
                }
            }
        }
        (OutputHead::Softmax, LossKind::Mse, _) => {
            return Err(Error::InvalidConfig(
                "mse gradient through a softmax head is not supported".into(),
            ));
        }
        (OutputHead::Identity, LossKind::CrossEntropy, _) => {
            return Err(Error::InvalidConfig(
                "cross_entropy gradient requires a softmax output head".into(),
            ));
        }
        _ => {
            return Err(Error::InvalidConfig(
                "loss kind does not match target kind".into(),
            ));
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_one_hot_cross_entropy_is_zero() {
        let out = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = Targets::Class(vec![0, 1]);
        let l = weighted_loss(&out, &y, &[1.0, 1.0], LossKind::CrossEntropy).unwrap();
        assert!(l.abs() < 1e-12);
    }

    #[test]
    fn uniform_prediction_cross_entropy_is_ln_k() {
        for k in [2usize, 3, 7] {
            let out = Matrix::from_row(&vec![1.0 / k as f64; k]);
            let y = Targets::Class(vec![0]);
            let l = weighted_loss(&out, &y, &[1.0], LossKind::CrossEntropy).unwrap();
            assert!((l - (k as f64).ln()).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn zero_probability_true_class_is_clamped() {
        let out = Matrix::from_row(&[0.0, 1.0]);
        let y = Targets::Class(vec![0]);
        let l = weighted_loss(&out, &y, &[1.0], LossKind::CrossEntropy).unwrap();
        assert!(l.is_finite());
        assert!((l - (-LOG_PROB_EPSILON.ln())).abs() < 1e-9);
    }

    #[test]
    fn weighted_mse_matches_hand_computation() {
        // Outputs [1, 2, 4], targets [0, 0, 1], weights [1, 2, 0.5]:
        // l = (1*1 + 2*4 + 0.5*9) / 3 = 13.5 / 3 = 4.5
        let out = Matrix::column(&[1.0, 2.0, 4.0]);
        let y = Targets::Real(Matrix::column(&[0.0, 0.0, 1.0]));
        let l = weighted_loss(&out, &y, &[1.0, 2.0, 0.5], LossKind::Mse).unwrap();
        assert!((l - 4.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_brier_is_k_minus_one_over_k() {
        for k in [2usize, 5, 10] {
            let out = Matrix::from_row(&vec![1.0 / k as f64; k]);
            let y = Targets::Class(vec![1]);
            let l = weighted_loss(&out, &y, &[1.0], LossKind::Brier).unwrap();
            assert!((l - (k as f64 - 1.0) / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_is_homogeneous_in_weights() {
        let out = Matrix::from_rows(&[vec![0.7, 0.3], vec![0.2, 0.8]]).unwrap();
        let y = Targets::Class(vec![0, 0]);
        for c in [0.0, 0.5, 3.0] {
            let base = weighted_loss(&out, &y, &[1.0, 2.0], LossKind::Brier).unwrap();
            let scaled =
                weighted_loss(&out, &y, &[c * 1.0, c * 2.0], LossKind::Brier).unwrap();
            assert!((scaled - c * base).abs() < 1e-12);
        }
    }
}
