//! Pairwise ensemble diversity from the 2x2 correct/incorrect contingency.
//!
//! For each member pair, over the evaluation inputs: `n11` counts inputs both
//! got right, `n00` both wrong, `n10`/`n01` exactly one right. The measures:
//!
//! - ratio-error: `100 * (n10 + n01) / n00` (higher = errors coincide less)
//! - Q-statistic: `(n11*n00 - n01*n10) / (n11*n00 + n01*n10)`
//! - correlation: same numerator over the product of marginal counts, rooted
//! - disagreement: fraction of inputs where the two predicted labels differ
//!
//! Pairs whose denominator vanishes are skipped for that measure and counted
//! in the report; disagreement is always defined.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pair-averaged diversity measures. `ratio_error`, `q_statistic`, and
/// `correlation` are `None` when every pair was degenerate for that measure.
/// `disagreement` is a fraction in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub ratio_error: Option<f64>,
    pub q_statistic: Option<f64>,
    pub correlation: Option<f64>,
    pub disagreement: f64,
    pub pairs: usize,
    pub skipped_ratio_error: usize,
    pub skipped_q: usize,
    pub skipped_correlation: usize,
}

/// Diversity over all member pairs, from hard predicted labels.
pub fn diversity(member_predictions: &[Vec<usize>], truth: &[usize]) -> Result<DiversityReport> {
    let b = member_predictions.len();
    if b < 2 {
        return Err(Error::InvalidData(
            "diversity needs at least two members".into(),
        ));
    }
    let m = truth.len();
    if m == 0 {
        return Err(Error::InvalidData("no evaluation inputs".into()));
    }
    for (i, preds) in member_predictions.iter().enumerate() {
        if preds.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "member {} has {} predictions for {} inputs",
                i,
                preds.len(),
                m
            )));
        }
    }

    let mut ratio_sum = 0.0;
    let mut ratio_n = 0usize;
    let mut q_sum = 0.0;
    let mut q_n = 0usize;
    let mut corr_sum = 0.0;
    let mut corr_n = 0usize;
    let mut dis_sum = 0.0;
    let mut pairs = 0usize;

    for i in 0..b {
        for j in (i + 1)..b {
            pairs += 1;
            let (mut n11, mut n00, mut n10, mut n01) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            let mut differ = 0usize;
            for ((&pi, &pj), &t) in member_predictions[i]
                .iter()
                .zip(&member_predictions[j])
                .zip(truth)
            {
                let ci = pi == t;
                let cj = pj == t;
                match (ci, cj) {
                    (true, true) => n11 += 1.0,
                    (false, false) => n00 += 1.0,
                    (true, false) => n10 += 1.0,
                    (false, true) => n01 += 1.0,
                }
                if pi != pj {
                    differ += 1;
                }
            }
            dis_sum += differ as f64 / m as f64;

            if n00 > 0.0 {
                ratio_sum += 100.0 * (n10 + n01) / n00;
                ratio_n += 1;
            }
            let q_den = n11 * n00 + n01 * n10;
            if q_den > 0.0 {
                q_sum += (n11 * n00 - n01 * n10) / q_den;
                q_n += 1;
            }
            let corr_den =
                ((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)).sqrt();
            if corr_den > 0.0 {
                corr_sum += (n11 * n00 - n01 * n10) / corr_den;
                corr_n += 1;
            }
        }
    }

    Ok(DiversityReport {
        ratio_error: (ratio_n > 0).then(|| ratio_sum / ratio_n as f64),
        q_statistic: (q_n > 0).then(|| q_sum / q_n as f64),
        correlation: (corr_n > 0).then(|| corr_sum / corr_n as f64),
        disagreement: dis_sum / pairs as f64,
        pairs,
        skipped_ratio_error: pairs - ratio_n,
        skipped_q: pairs - q_n,
        skipped_correlation: pairs - corr_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_members_are_maximally_correlated() {
        // Must have both hits and misses so the contingency is non-degenerate.
        let preds = vec![vec![0, 1, 1, 0], vec![0, 1, 1, 0]];
        let truth = vec![0, 1, 0, 1];
        let r = diversity(&preds, &truth).unwrap();
        assert_eq!(r.q_statistic, Some(1.0));
        assert_eq!(r.correlation, Some(1.0));
        assert_eq!(r.disagreement, 0.0);
    }

    #[test]
    fn always_right_vs_always_wrong_pair_is_skipped() {
        let truth = vec![0, 1, 0];
        let right = truth.clone();
        let wrong: Vec<usize> = truth.iter().map(|&t| 1 - t).collect();
        let r = diversity(&[right, wrong], &truth).unwrap();
        // n11 = n00 = 0: Q, correlation, and ratio-error all skip the pair.
        assert_eq!(r.q_statistic, None);
        assert_eq!(r.correlation, None);
        assert_eq!(r.ratio_error, None);
        assert_eq!(r.skipped_q, 1);
        assert_eq!(r.disagreement, 1.0);
    }

    #[test]
    fn three_member_fixture_matches_exhaustive_hand_count() {
        // 3 members, 10 inputs, binary truth.
        let truth = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let m_a = vec![0, 0, 0, 1, 1, 1, 1, 1, 0, 0]; // correct: 1,1,1,0,0,1,1,1,0,0
        let m_b = vec![0, 0, 1, 1, 0, 1, 0, 1, 1, 0]; // correct: 1,1,0,0,1,1,0,1,1,0
        let m_c = vec![1, 0, 0, 0, 0, 0, 1, 1, 1, 1]; // correct: 0,1,1,1,1,0,1,1,1,1
        let r = diversity(&[m_a.clone(), m_b.clone(), m_c.clone()], &truth).unwrap();

        // Pair (a,b): correctness pairs
        // (1,1)(1,1)(1,0)(0,0)(0,1)(1,1)(1,0)(1,1)(0,1)(0,0)
        // n11=4, n00=2, n10=2, n01=2
        // Q_ab = (8-4)/(8+4) = 1/3; corr_ab = 4/sqrt(6*4*6*4) = 4/24
        // ratio_ab = 100*(2+2)/2 = 200; labels differ at 2,4,6,8 -> 4/10
        // Pair (a,c): (1,0)(1,1)(1,1)(0,1)(0,1)(1,0)(1,1)(1,1)(0,1)(0,1)
        // n11=4, n00=0, n10=2, n01=4
        // ratio skipped (n00=0); Q_ac = (0-8)/(0+8) = -1
        // corr_ac = -8/sqrt(6*4*8*2) = -8/sqrt(384)
        // labels differ at 0,3,4,5,8,9 -> 6/10
        // Pair (b,c): (1,0)(1,1)(0,1)(0,1)(1,1)(1,0)(0,1)(1,1)(1,1)(0,1)
        // n11=4, n00=0, n10=2, n01=4 -> same shape as (a,c)
        // labels differ at 0,2,3,5,6,9 -> 6/10
        let q_ab = (8.0 - 4.0) / (8.0 + 4.0);
        let expected_q = (q_ab + (-1.0) + (-1.0)) / 3.0;
        assert!((r.q_statistic.unwrap() - expected_q).abs() < 1e-12);
        assert_eq!(r.skipped_q, 0);
        assert!((r.ratio_error.unwrap() - 200.0).abs() < 1e-12);
        assert_eq!(r.skipped_ratio_error, 2);
        let corr_ab = 4.0 / 24.0;
        let corr_ac = -8.0 / 384.0_f64.sqrt();
        let expected_corr = (corr_ab + corr_ac + corr_ac) / 3.0;
        assert!((r.correlation.unwrap() - expected_corr).abs() < 1e-12);
        let expected_dis = (0.4 + 0.6 + 0.6) / 3.0;
        assert!((r.disagreement - expected_dis).abs() < 1e-12);
    }

    #[test]
    fn one_member_is_rejected() {
        assert!(diversity(&[vec![0, 1]], &[0, 1]).is_err());
    }

    proptest! {
        // Q and correlation share their numerator, so they share sign.
        #[test]
        fn q_and_correlation_share_sign(
            seed in 0u64..500,
        ) {
            use rand::Rng;
            let mut rng = crate::rng::seeded_rng(seed);
            let m = 24;
            let truth: Vec<usize> = (0..m).map(|_| rng.random_range(0..2)).collect();
            let a: Vec<usize> = (0..m).map(|_| rng.random_range(0..2)).collect();
            let b: Vec<usize> = (0..m).map(|_| rng.random_range(0..2)).collect();
            let r = diversity(&[a, b], &truth).unwrap();
            if let (Some(q), Some(c)) = (r.q_statistic, r.correlation) {
                prop_assert!(q * c >= 0.0, "q={q} corr={c}");
            }
        }
    }
}
