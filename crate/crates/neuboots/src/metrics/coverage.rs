//! Frequentist coverage of confidence bands.

use serde::{Deserialize, Serialize};

use crate::generator::Band;
use crate::{Error, Result};

/// Per-point containment indicators plus their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub per_point: Vec<bool>,
    pub rate: f64,
}

/// Whether each band contains the true value at its grid point
/// (`lower <= truth <= upper`), and the fraction that do.
pub fn coverage_rate(bands: &[Band], truth: &[f64]) -> Result<CoverageResult> {
    if bands.is_empty() {
        return Err(Error::InvalidData("no bands".into()));
    }
    if bands.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} bands but {} truth values",
            bands.len(),
            truth.len()
        )));
    }
    let per_point: Vec<bool> = bands
        .iter()
        .zip(truth)
        .map(|(b, &t)| b.lower <= t && t <= b.upper)
        .collect();
    let rate = per_point.iter().filter(|&&c| c).count() as f64 / per_point.len() as f64;
    Ok(CoverageResult { per_point, rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(lower: f64, upper: f64) -> Band {
        Band {
            lower,
            upper,
            mean: 0.5 * (lower + upper),
        }
    }

    #[test]
    fn infinite_band_covers_everything() {
        let bands = vec![band(f64::MIN, f64::MAX); 5];
        let truth = vec![-1e100, 0.0, 3.0, 1e100, 42.0];
        assert_eq!(coverage_rate(&bands, &truth).unwrap().rate, 1.0);
    }

    #[test]
    fn zero_width_band_off_truth_covers_nothing() {
        let bands = vec![band(1.0, 1.0); 3];
        let truth = vec![0.0, 2.0, -5.0];
        assert_eq!(coverage_rate(&bands, &truth).unwrap().rate, 0.0);
    }

    #[test]
    fn boundary_counts_as_covered() {
        let r = coverage_rate(&[band(0.0, 1.0)], &[1.0]).unwrap();
        assert!(r.per_point[0]);
    }

    #[test]
    fn gaussian_linear_model_bands_cover_at_nominal_rate() {
        // Oracle: exact 95% confidence bands for the mean response of a
        // linear model with known noise variance. Over replications the
        // empirical coverage at each grid point must be 0.95 +- 0.04.
        use crate::rng::seeded_rng;
        use rand::Rng;
        use rand_distr::StandardNormal;

        let n = 40;
        let sigma = 0.5;
        let (a0, b0) = (1.0, 2.0);
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let grid = [-0.8, -0.3, 0.0, 0.4, 0.9];
        let z = 1.959963984540054; // two-sided 95% normal quantile

        // Precompute (X^T X)^{-1} pieces for design [1, x].
        let sx: f64 = xs.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let det = n as f64 * sxx - sx * sx;

        let reps = 200;
        let mut covered = vec![0usize; grid.len()];
        let mut rng = seeded_rng(2024);
        for _ in 0..reps {
            let ys: Vec<f64> = xs
                .iter()
                .map(|&x| a0 + b0 * x + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let sy: f64 = ys.iter().sum();
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
            let b_hat = (n as f64 * sxy - sx * sy) / det;
            let a_hat = (sy - b_hat * sx) / n as f64;

            let bands: Vec<Band> = grid
                .iter()
                .map(|&g| {
                    // Var(a + b g) = sigma^2 * [1, g] (X^T X)^{-1} [1, g]^T
                    let v = sigma * sigma * (sxx - 2.0 * g * sx + n as f64 * g * g) / det;
                    let mean = a_hat + b_hat * g;
                    let half = z * v.sqrt();
                    Band {
                        lower: mean - half,
                        upper: mean + half,
                        mean,
                    }
                })
                .collect();
            let truth: Vec<f64> = grid.iter().map(|&g| a0 + b0 * g).collect();
            let r = coverage_rate(&bands, &truth).unwrap();
            for (c, &ok) in covered.iter_mut().zip(&r.per_point) {
                *c += usize::from(ok);
            }
        }
        for (i, &c) in covered.iter().enumerate() {
            let rate = c as f64 / reps as f64;
            assert!((rate - 0.95).abs() <= 0.04, "grid point {i}: rate {rate}");
        }
    }
}
