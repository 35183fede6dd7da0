//! L2-regularized logistic regression fit by Newton iterations.
//!
//! Objective: mean negative log-likelihood plus `(lambda/2) * ||w||^2`, with
//! the bias unregularized. With both classes nonempty the optimum is finite
//! even under perfect separation.

use crate::matrix::Matrix;
use crate::{Error, Result};

pub(crate) struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Solve `A x = b` for a small dense symmetric system by Gaussian elimination
/// with partial pivoting. `a` is row-major `d x d`.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, d: usize) -> Result<Vec<f64>> {
    for col in 0..d {
        let mut pivot = col;
        for r in (col + 1)..d {
            if a[r * d + col].abs() > a[pivot * d + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * d + col].abs() < 1e-300 {
            return Err(Error::InvalidData("singular Newton system".into()));
        }
        if pivot != col {
            for c in 0..d {
                a.swap(col * d + c, pivot * d + c);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * d + col];
        for r in (col + 1)..d {
            let f = a[r * d + col] / diag;
            if f == 0.0 {
                continue;
            }
            for c in col..d {
                a[r * d + c] -= f * a[col * d + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; d];
    for col in (0..d).rev() {
        let mut acc = b[col];
        for c in (col + 1)..d {
            acc -= a[col * d + c] * x[c];
        }
        x[col] = acc / a[col * d + col];
    }
    Ok(x)
}

/// Fit on rows of `x` with binary targets `y` (0 or 1).
pub(crate) fn fit_logistic(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    max_iter: usize,
    grad_tol: f64,
) -> Result<LogisticFit> {
    let m = x.rows();
    let p = x.cols();
    if m == 0 || m != y.len() {
        return Err(Error::InvalidData(format!(
            "{} rows with {} targets",
            m,
            y.len()
        )));
    }
    // Parameter vector: [w_0 .. w_{p-1}, bias].
    let d = p + 1;
    let mut theta = vec![0.0; d];
    let inv_m = 1.0 / m as f64;
    let mut iterations = 0;

    for _ in 0..max_iter {
        // Gradient and Hessian of the regularized mean NLL.
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for (row, &target) in x.iter_rows().zip(y) {
            let z = row
                .iter()
                .zip(&theta[..p])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                + theta[p];
            let mu = sigmoid(z);
            let r = (mu - target) * inv_m;
            let s = mu * (1.0 - mu) * inv_m;
            for (j, &xj) in row.iter().enumerate() {
                grad[j] += r * xj;
                for (k, &xk) in row.iter().enumerate().skip(j) {
                    hess[j * d + k] += s * xj * xk;
                }
                hess[j * d + p] += s * xj;
            }
            grad[p] += r;
            hess[p * d + p] += s;
        }
        for j in 0..p {
            grad[j] += lambda * theta[j];
            hess[j * d + j] += lambda;
        }
        // Mirror the upper triangle.
        for j in 0..d {
            for k in (j + 1)..d {
                hess[k * d + j] = hess[j * d + k];
            }
        }

        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < grad_tol {
            break;
        }
        let delta = solve_dense(hess, grad, d)?;
        for (t, dl) in theta.iter_mut().zip(&delta) {
            *t -= dl;
        }
        iterations += 1;
    }

    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidData(
            "logistic fit produced non-finite parameters".into(),
        ));
    }
    Ok(LogisticFit {
        bias: theta[p],
        weights: theta[..p].to_vec(),
        iterations,
    })
}

/// Linear score `w . x + b` mapped through the sigmoid.
pub(crate) fn predict_logistic(weights: &[f64], bias: f64, row: &[f64]) -> f64 {
    sigmoid(
        row.iter()
            .zip(weights)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + bias,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[2,1],[1,3]] x = [3,5] -> x = [4/5, 7/5]
        let x = solve_dense(vec![2.0, 1.0, 1.0, 3.0], vec![3.0, 5.0], 2).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn mirrored_data_has_zero_bias() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.5],
            vec![2.0, -0.5],
            vec![-1.0, -0.5],
            vec![-2.0, 0.5],
        ])
        .unwrap();
        let y = vec![1.0, 1.0, 0.0, 0.0];
        let fit = fit_logistic(&x, &y, 1e-4, 100, 1e-10).unwrap();
        assert!(fit.bias.abs() < 1e-6, "bias = {}", fit.bias);
    }

    #[test]
    fn separable_data_stays_finite() {
        let x = Matrix::from_rows(&[vec![2.0], vec![3.0], vec![-2.0], vec![-3.0]]).unwrap();
        let y = vec![1.0, 1.0, 0.0, 0.0];
        let fit = fit_logistic(&x, &y, 1e-4, 100, 1e-8).unwrap();
        assert!(fit.weights[0].is_finite() && fit.weights[0] > 0.0);
        assert!(fit.iterations <= 100);
    }

    #[test]
    fn matches_gradient_descent_refit() {
        // Second optimizer as oracle: plain gradient descent on the same
        // objective must land on the same coefficients.
        let x = Matrix::from_rows(&[
            vec![0.2, 1.1],
            vec![1.4, -0.3],
            vec![0.9, 0.8],
            vec![-1.2, 0.4],
            vec![-0.6, -1.0],
            vec![-0.1, -0.2],
        ])
        .unwrap();
        let y = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let lambda = 1e-4;
        let newton = fit_logistic(&x, &y, lambda, 100, 1e-12).unwrap();

        let m = x.rows() as f64;
        let mut theta = vec![0.0; 3];
        let lr = 0.5;
        for _ in 0..200_000 {
            let mut grad = vec![0.0; 3];
            for (row, &t) in x.iter_rows().zip(&y) {
                let z = row[0] * theta[0] + row[1] * theta[1] + theta[2];
                let r = (sigmoid(z) - t) / m;
                grad[0] += r * row[0];
                grad[1] += r * row[1];
                grad[2] += r;
            }
            grad[0] += lambda * theta[0];
            grad[1] += lambda * theta[1];
            for (p, g) in theta.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
        assert!((newton.weights[0] - theta[0]).abs() < 1e-4);
        assert!((newton.weights[1] - theta[1]).abs() < 1e-4);
        assert!((newton.bias - theta[2]).abs() < 1e-4);
    }
}
