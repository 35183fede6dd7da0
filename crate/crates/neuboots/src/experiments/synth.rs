//! Synthetic dataset generators.
//!
//! Regression targets live on `x in [-2, 2]`; classification generators are
//! two-dimensional. Every generator is a pure function of the RNG.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Domain of all regression targets.
pub const REGRESSION_DOMAIN: (f64, f64) = (-2.0, 2.0);

/// Known true regression functions, kept alongside the sampled data so
/// coverage can be scored against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionTarget {
    /// `sin(pi x)`
    Sine,
    /// `-1` below zero, `1` at and above
    Step,
    /// Two Gaussian bumps of different widths
    Bumps,
    /// `0.8 x + 0.3`
    Linear,
}

impl RegressionTarget {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RegressionTarget::Sine => (std::f64::consts::PI * x).sin(),
            RegressionTarget::Step => {
                if x < 0.0 {
                    -1.0
                } else {
                    1.0
                }
            }
            RegressionTarget::Bumps => {
                1.2 * (-2.0 * (x + 1.0) * (x + 1.0)).exp()
                    + 0.8 * (-8.0 * (x - 0.7) * (x - 0.7)).exp()
            }
            RegressionTarget::Linear => 0.8 * x + 0.3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegressionTarget::Sine => "sine",
            RegressionTarget::Step => "step",
            RegressionTarget::Bumps => "bumps",
            RegressionTarget::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Self::Sine),
            "step" => Ok(Self::Step),
            "bumps" => Ok(Self::Bumps),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidConfig(format!(
                "unknown regression target '{other}'; expected sine, step, bumps, or linear"
            ))),
        }
    }
}

/// `x ~ U(domain)`, `y = f0(x) + noise_sd * N(0,1)`.
pub fn synth_regression(
    target: RegressionTarget,
    n: usize,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Dataset, RegressionTarget)> {
    if n < 10 {
        return Err(Error::InvalidConfig(format!(
            "regression generator needs n >= 10, got {n}"
        )));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("bad noise_sd {noise_sd}")));
    }
    let (lo, hi) = REGRESSION_DOMAIN;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(lo..hi);
        let noise: f64 = rng.sample(StandardNormal);
        xs.push(x);
        ys.push(target.eval(x) + noise_sd * noise);
    }
    let ds = Dataset::regression(Matrix::column(&xs), Matrix::column(&ys))?;
    Ok((ds, target))
}

/// Interleaved half-moons. `separation` shifts the second moon downward,
/// turning the interleaved pair linearly separable as it grows.
/// `label_noise` flips each label independently with that probability.
pub fn synth_two_moons(
    n: usize,
    noise: f64,
    separation: f64,
    label_noise: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidConfig("two_moons needs n >= 4".into()));
    }
    if !(0.0..=0.5).contains(&label_noise) {
        return Err(Error::InvalidConfig(format!(
            "label_noise must be in [0, 0.5], got {label_noise}"
        )));
    }
    let n0 = n / 2;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let (mut px, mut py, label) = if i < n0 {
            (t.cos(), t.sin(), 0usize)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin() - separation, 1usize)
        };
        px += noise * rng.sample::<f64, _>(StandardNormal);
        py += noise * rng.sample::<f64, _>(StandardNormal);
        let flipped = if rng.random::<f64>() < label_noise {
            1 - label
        } else {
            label
        };
        rows.push(vec![px, py]);
        labels.push(flipped);
    }
    Dataset::classification(Matrix::from_rows(&rows)?, labels, 2)
}

/// `k` isotropic Gaussian classes with means on a circle of the given radius,
/// `n` split as evenly as possible. `offset` translates every mean (used to
/// build shifted out-of-distribution sets).
pub fn synth_gaussians(
    n: usize,
    classes: usize,
    radius: f64,
    spread: f64,
    offset: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::InvalidConfig("need at least two classes".into()));
    }
    if n < classes {
        return Err(Error::InvalidConfig(format!(
            "{n} samples cannot cover {classes} classes"
        )));
    }
    let base = n / classes;
    let extra = n % classes;
    let counts: Vec<usize> = (0..classes)
        .map(|c| base + usize::from(c < extra))
        .collect();
    synth_gaussians_with_counts(&counts, radius, spread, offset, rng)
}

/// Gaussian classes with an explicit per-class count vector.
pub fn synth_imbalanced_gaussians(
    counts: &[usize],
    radius: f64,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    synth_gaussians_with_counts(counts, radius, spread, (0.0, 0.0), rng)
}

fn synth_gaussians_with_counts(
    counts: &[usize],
    radius: f64,
    spread: f64,
    offset: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let classes = counts.len();
    if classes < 2 {
        return Err(Error::InvalidConfig(
            "count vector needs at least two classes".into(),
        ));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidConfig(
            "every class needs at least one sample".into(),
        ));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidConfig(format!("bad spread {spread}")));
    }
    let total: usize = counts.iter().sum();
    let mut rows = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for (c, &count) in counts.iter().enumerate() {
        let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
        let (mx, my) = (
            radius * angle.cos() + offset.0,
            radius * angle.sin() + offset.1,
        );
        for _ in 0..count {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            rows.push(vec![mx + spread * dx, my + spread * dy]);
            labels.push(c);
        }
    }
    Dataset::classification(Matrix::from_rows(&rows)?, labels, classes)
}

/// Evenly spaced evaluation grid over the regression domain.
pub fn regression_grid(points: usize) -> Vec<f64> {
    let (lo, hi) = REGRESSION_DOMAIN;
    if points == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fit_logistic;
    use crate::rng::seeded_rng;

    #[test]
    fn zero_noise_reproduces_the_target_exactly() {
        let mut rng = seeded_rng(1);
        for target in [
            RegressionTarget::Sine,
            RegressionTarget::Step,
            RegressionTarget::Bumps,
            RegressionTarget::Linear,
        ] {
            let (ds, f0) = synth_regression(target, 50, 0.0, &mut rng).unwrap();
            if let crate::data::Targets::Real(y) = ds.y() {
                for (x, yv) in ds.x().iter_rows().zip(y.iter_rows()) {
                    assert_eq!(yv[0], f0.eval(x[0]));
                }
            } else {
                panic!("regression targets expected");
            }
        }
    }

    #[test]
    fn noiseless_linear_has_zero_least_squares_residual() {
        let mut rng = seeded_rng(2);
        let (ds, _) = synth_regression(RegressionTarget::Linear, 100, 0.0, &mut rng).unwrap();
        // Closed-form simple regression fit.
        let xs: Vec<f64> = ds.x().as_slice().to_vec();
        let ys: Vec<f64> = match ds.y() {
            crate::data::Targets::Real(m) => m.as_slice().to_vec(),
            _ => unreachable!(),
        };
        let n = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - slope * sx) / n;
        let residual: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        assert!(residual < 1e-20, "residual = {residual}");
        assert!((slope - 0.8).abs() < 1e-9);
        assert!((intercept - 0.3).abs() < 1e-9);
    }

    #[test]
    fn sine_sample_moments_match_closed_form() {
        // Over U(-2,2): E[y] = 0 and E[y^2] = 1/2 + noise^2 (two full sine
        // periods, so the mean square of sin is exactly 1/2).
        let mut rng = seeded_rng(3);
        let noise = 0.3;
        let (ds, _) = synth_regression(RegressionTarget::Sine, 200_000, noise, &mut rng).unwrap();
        let ys: Vec<f64> = match ds.y() {
            crate::data::Targets::Real(m) => m.as_slice().to_vec(),
            _ => unreachable!(),
        };
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let mean_sq = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
        assert!(mean.abs() < 0.01, "mean = {mean}");
        assert!((mean_sq - (0.5 + noise * noise)).abs() < 0.02, "m2 = {mean_sq}");
    }

    #[test]
    fn widely_separated_moons_are_linearly_separable() {
        let mut rng = seeded_rng(4);
        let ds = synth_two_moons(300, 0.05, 6.0, 0.0, &mut rng).unwrap();
        let y: Vec<f64> = ds
            .class_labels()
            .unwrap()
            .iter()
            .map(|&c| c as f64)
            .collect();
        let fit = fit_logistic(ds.x(), &y, 1e-6, 100, 1e-10).unwrap();
        let correct = ds
            .x()
            .iter_rows()
            .zip(ds.class_labels().unwrap())
            .filter(|&(row, &label)| {
                let z = row[0] * fit.weights[0] + row[1] * fit.weights[1] + fit.bias;
                (z > 0.0) == (label == 1)
            })
            .count();
        assert_eq!(correct, ds.len(), "linear probe must reach 100% accuracy");
    }

    #[test]
    fn imbalanced_counts_are_exact() {
        let counts: Vec<usize> = (1..=10).map(|i| i * 50).collect();
        let mut rng = seeded_rng(5);
        let ds = synth_imbalanced_gaussians(&counts, 4.0, 0.5, &mut rng).unwrap();
        let labels = ds.class_labels().unwrap();
        for (c, &expected) in counts.iter().enumerate() {
            let got = labels.iter().filter(|&&l| l == c).count();
            assert_eq!(got, expected, "class {c}");
        }
    }

    #[test]
    fn class_conditional_means_match_generator_parameters() {
        let mut rng = seeded_rng(6);
        let (radius, spread) = (3.0, 0.4);
        let classes = 4;
        let ds = synth_gaussians(40_000, classes, radius, spread, (0.0, 0.0), &mut rng).unwrap();
        let labels = ds.class_labels().unwrap();
        for c in 0..classes {
            let rows: Vec<&[f64]> = ds
                .x()
                .iter_rows()
                .zip(labels)
                .filter(|&(_, &l)| l == c)
                .map(|(r, _)| r)
                .collect();
            let m = rows.len() as f64;
            let mean_x = rows.iter().map(|r| r[0]).sum::<f64>() / m;
            let mean_y = rows.iter().map(|r| r[1]).sum::<f64>() / m;
            let angle = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
            assert!((mean_x - radius * angle.cos()).abs() < 0.03);
            assert!((mean_y - radius * angle.sin()).abs() < 0.03);
        }
    }

    #[test]
    fn tiny_n_rejected() {
        let mut rng = seeded_rng(7);
        assert!(synth_regression(RegressionTarget::Sine, 5, 0.1, &mut rng).is_err());
    }
}
