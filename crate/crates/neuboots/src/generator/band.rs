//! Prediction ensembles and pointwise confidence bands.

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// `B` bootstrapped predictions for one input: post-softmax probabilities for
/// classification, raw outputs for regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionEnsemble {
    samples: Matrix,
}

impl PredictionEnsemble {
    pub fn new(samples: Matrix) -> Result<Self> {
        if samples.rows() == 0 {
            return Err(Error::InvalidData("ensemble with zero samples".into()));
        }
        Ok(Self { samples })
    }

    /// `B x output_dim` sample matrix.
    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    /// Number of bootstrap samples `B`.
    pub fn size(&self) -> usize {
        self.samples.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.samples.cols()
    }

    /// Ensemble mean per output dimension.
    pub fn mean(&self) -> Vec<f64> {
        self.samples.column_means()
    }

    /// Population standard deviation per output dimension.
    pub fn std(&self) -> Vec<f64> {
        let means = self.mean();
        let b = self.size() as f64;
        let mut acc = vec![0.0; self.output_dim()];
        for row in self.samples.iter_rows() {
            for ((a, &v), m) in acc.iter_mut().zip(row).zip(&means) {
                let d = v - m;
                *a += d * d;
            }
        }
        acc.into_iter().map(|v| (v / b).sqrt()).collect()
    }

    /// Class of the ensemble-mean probability vector (lowest index wins ties).
    pub fn argmax_mean(&self) -> usize {
        argmax(&self.mean())
    }

    /// Pointwise band for a scalar-output ensemble.
    pub fn band(&self, level: f64) -> Result<Band> {
        if self.output_dim() != 1 {
            return Err(Error::InvalidConfig(format!(
                "confidence bands are defined for scalar outputs, got dim {}",
                self.output_dim()
            )));
        }
        let values: Vec<f64> = self.samples.as_slice().to_vec();
        band_of_samples(&values, level)
    }
}

/// Lowest-index argmax.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One grid point of a confidence band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`h = q * (n - 1)`, the common "type 7" rule).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn band_of_samples(values: &[f64], level: f64) -> Result<Band> {
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "band level must be in (0,1), got {level}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample in ensemble"));
    let tail = (1.0 - level) / 2.0;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(Band {
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
        mean,
    })
}

/// Pointwise empirical bands at the given level, one per grid point.
pub fn confidence_band(ensembles: &[PredictionEnsemble], level: f64) -> Result<Vec<Band>> {
    ensembles.iter().map(|e| e.band(level)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_ensemble(values: &[f64]) -> PredictionEnsemble {
        PredictionEnsemble::new(Matrix::column(values)).unwrap()
    }

    #[test]
    fn degenerate_ensemble_collapses_band() {
        let e = scalar_ensemble(&[2.5; 40]);
        let b = e.band(0.95).unwrap();
        assert_eq!((b.lower, b.upper, b.mean), (2.5, 2.5, 2.5));
    }

    #[test]
    fn interpolated_quantiles_match_hand_values() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let b = scalar_ensemble(&values).band(0.9).unwrap();
        assert!((b.lower - 5.95).abs() < 1e-12, "lower={}", b.lower);
        assert!((b.upper - 95.05).abs() < 1e-12, "upper={}", b.upper);
        assert!((b.mean - 50.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_level_rejected() {
        let e = scalar_ensemble(&[1.0, 2.0]);
        assert!(e.band(0.0).is_err());
        assert!(e.band(1.0).is_err());
        assert!(e.band(-0.5).is_err());
    }

    proptest! {
        // Band width shrinks (weakly) as the level shrinks.
        #[test]
        fn band_width_monotone_in_level(
            mut values in proptest::collection::vec(-100.0f64..100.0, 5..60),
            lo_level in 0.05f64..0.5,
            hi_level in 0.5f64..0.99,
        ) {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let e = scalar_ensemble(&values);
            let narrow = e.band(lo_level).unwrap();
            let wide = e.band(hi_level).unwrap();
            prop_assert!(wide.upper - wide.lower + 1e-12 >= narrow.upper - narrow.lower);
        }
    }
}
