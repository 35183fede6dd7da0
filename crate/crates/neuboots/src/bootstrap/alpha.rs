//! Block bootstrap weight vectors.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// How a weight vector was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaKind {
    /// `S x Dirichlet(1, ..., 1)`: strictly positive reals summing to `S`.
    Dirichlet,
    /// `Multinomial(S; 1/S, ..., 1/S)`: nonnegative integer counts summing to `S`.
    Multinomial,
}

/// An `S`-vector of nonnegative block weights summing to `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapAlpha {
    values: Vec<f64>,
    kind: AlphaKind,
}

impl BootstrapAlpha {
    /// The unit vector: every block weight exactly 1. Degenerate but valid
    /// for both kinds; used to recover the deterministic network.
    pub fn ones(s: usize) -> Self {
        Self {
            values: vec![1.0; s],
            kind: AlphaKind::Dirichlet,
        }
    }

    /// Wrap explicit block weights. Entries must be finite and nonnegative;
    /// the sum-to-`S` law of the samplers is not enforced here, so arbitrary
    /// scale vectors (e.g. all zeros) can be pushed through a generator.
    pub fn from_values(values: Vec<f64>, kind: AlphaKind) -> crate::Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(crate::Error::InvalidData(format!(
                "block weights must be finite and nonnegative, got {v}"
            )));
        }
        if values.is_empty() {
            return Err(crate::Error::InvalidData("empty weight vector".into()));
        }
        Ok(Self { values, kind })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> AlphaKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Draw `S x Dirichlet(1, ..., 1)` exactly: `S` i.i.d. unit exponentials
/// normalized by their sum, then scaled by `S`. The sum-to-`S` constraint
/// holds by construction, not only asymptotically.
pub fn sample_dirichlet_alpha<R: Rng + ?Sized>(s: usize, rng: &mut R) -> BootstrapAlpha {
    assert!(s >= 1, "need at least one block");
    let mut values = Vec::with_capacity(s);
    let mut sum = 0.0;
    for _ in 0..s {
        let z: f64 = rng.sample(Exp1);
        values.push(z);
        sum += z;
    }
    // Multiply before dividing so S = 1 yields exactly z/z = 1.0.
    let s_f = s as f64;
    for v in &mut values {
        *v = *v * s_f / sum;
    }
    BootstrapAlpha {
        values,
        kind: AlphaKind::Dirichlet,
    }
}

/// Draw `Multinomial(S; 1/S, ..., 1/S)`: counts from `S` throws into `S`
/// equiprobable cells. Entries are integers and sum to `S` exactly.
pub fn sample_multinomial_alpha<R: Rng + ?Sized>(s: usize, rng: &mut R) -> BootstrapAlpha {
    assert!(s >= 1, "need at least one block");
    let mut counts = vec![0.0; s];
    for _ in 0..s {
        counts[rng.random_range(0..s)] += 1.0;
    }
    BootstrapAlpha {
        values: counts,
        kind: AlphaKind::Multinomial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    #[test]
    fn single_block_dirichlet_is_exactly_one() {
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let a = sample_dirichlet_alpha(1, &mut rng);
            assert_eq!(a.values(), &[1.0]);
        }
    }

    #[test]
    fn single_block_multinomial_is_exactly_one() {
        let mut rng = seeded_rng(4);
        let a = sample_multinomial_alpha(1, &mut rng);
        assert_eq!(a.values(), &[1.0]);
    }

    #[test]
    fn dirichlet_sums_to_s_and_is_positive() {
        let mut rng = seeded_rng(5);
        for s in [2usize, 7, 100] {
            for _ in 0..50 {
                let a = sample_dirichlet_alpha(s, &mut rng);
                let sum: f64 = a.values().iter().sum();
                assert!((sum - s as f64).abs() < 1e-9, "s={s} sum={sum}");
                assert!(a.values().iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn multinomial_entries_are_integer_counts() {
        let mut rng = seeded_rng(6);
        for s in [2usize, 31, 200] {
            let a = sample_multinomial_alpha(s, &mut rng);
            let sum: f64 = a.values().iter().sum();
            assert_eq!(sum, s as f64);
            assert!(a.values().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
        }
    }

    #[test]
    fn dirichlet_moments_match_analytic_values() {
        // Per-coordinate mean is 1; E[(alpha-1)^2] = (S-1)/(S+1).
        let s = 100;
        let draws = 20_000;
        let mut rng = seeded_rng(7);
        let mut mean = vec![0.0; s];
        let mut sq = 0.0;
        for _ in 0..draws {
            let a = sample_dirichlet_alpha(s, &mut rng);
            for (m, v) in mean.iter_mut().zip(a.values()) {
                *m += v;
            }
            sq += a
                .values()
                .iter()
                .map(|&v| (v - 1.0) * (v - 1.0))
                .sum::<f64>();
        }
        for m in &mean {
            assert!((m / draws as f64 - 1.0).abs() < 0.05);
        }
        let var = sq / (draws * s) as f64;
        let expected = (s as f64 - 1.0) / (s as f64 + 1.0);
        assert!((var - expected).abs() < 0.05, "var={var} expected={expected}");
    }

    #[test]
    fn multinomial_zero_cell_fraction_near_e_inverse() {
        let s = 200;
        let draws = 2_000;
        let mut rng = seeded_rng(8);
        let mut zeros = 0usize;
        for _ in 0..draws {
            let a = sample_multinomial_alpha(s, &mut rng);
            zeros += a.values().iter().filter(|&&v| v == 0.0).count();
        }
        let frac = zeros as f64 / (draws * s) as f64;
        let expected = (1.0 - 1.0 / s as f64).powi(s as i32);
        assert!((frac - expected).abs() < 0.01, "frac={frac} expected={expected}");
    }
}
