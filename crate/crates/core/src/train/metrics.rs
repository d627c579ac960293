//! Binary cross entropy and rank-based AUC.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::sigmoid;

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub auc: f64,
    pub logloss: f64,
    pub n: usize,
}

/// Mean binary cross entropy of sigmoid(logit) against 0/1 labels, in the
/// log-sum-exp form `max(z, 0) - z*y + ln(1 + exp(-|z|))` that never
/// overflows.
pub fn logloss(logits: &[f64], labels: &[f64]) -> Result<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::Argument(format!(
            "logloss: got {} logits and {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (&z, &y) in logits.iter().zip(labels) {
        total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    }
    Ok(total / logits.len() as f64)
}

/// Derivative of the mean logloss w.r.t. one logit: `(sigmoid(z) - y) / n`.
pub fn dlogloss(logit: f64, label: f64, n: usize) -> f64 {
    (sigmoid(logit) - label) / n as f64
}

/// AUC as the normalized Mann-Whitney U statistic. Ties contribute 1/2 via
/// average ranks, which makes this exactly the pairwise
/// `P(score_pos > score_neg) + 0.5 P(=)` count.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Argument("auc: length mismatch".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(
            "auc needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must be comparable")
    });
    // Average ranks within tie groups, 1-based.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Prng;

    #[test]
    fn logit_zero_label_one_is_ln_two() {
        let l = logloss(&[0.0], &[1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((l - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn large_logit_stays_finite() {
        // Stable form by hand: 20 - 20 + ln(1 + e^-20) = ln(1 + e^-20).
        let l = logloss(&[20.0], &[1.0]).unwrap();
        let expect = (-20.0f64).exp().ln_1p();
        assert!((l - expect).abs() < 1e-18);
        assert!((l - 2.061e-9).abs() < 1e-11);
        assert!(logloss(&[800.0], &[0.0]).unwrap().is_finite());
    }

    #[test]
    fn mean_over_mixed_labels() {
        let l = logloss(&[0.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(logloss(&[], &[]), Err(Error::Argument(_))));
    }

    #[test]
    fn perfect_ranking_is_one() {
        assert_eq!(auc(&[0.9, 0.1], &[1.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(auc(&[0.3, 0.3, 0.3, 0.3], &[1.0, 0.0, 1.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_a_metric_error() {
        assert!(matches!(
            auc(&[0.1, 0.9], &[1.0, 1.0]),
            Err(Error::Metric(_))
        ));
    }

    // O(n^2) pairwise oracle with half-credit for ties.
    fn auc_pairwise(scores: &[f64], labels: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, (&si, &yi)) in scores.iter().zip(labels).enumerate() {
            if yi != 1.0 {
                continue;
            }
            for (j, (&sj, &yj)) in scores.iter().zip(labels).enumerate() {
                if i == j || yj != 0.0 {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn rank_based_matches_pairwise_oracle_exactly() {
        let mut rng = Prng::new(2023);
        for _ in 0..100 {
            let n = 50;
            // Coarse grid forces ties.
            let scores: Vec<f64> = (0..n).map(|_| (rng.index(20) as f64) / 10.0).collect();
            let mut labels: Vec<f64> = (0..n).map(|_| (rng.index(2)) as f64).collect();
            labels[0] = 1.0;
            labels[1] = 0.0;
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            assert_eq!(fast, slow, "rank and pairwise AUC must agree exactly");
        }
    }

    #[test]
    fn invariant_under_strictly_monotone_transforms() {
        let mut rng = Prng::new(12);
        let n = 60;
        let scores: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let mut labels: Vec<f64> = (0..n).map(|_| rng.index(2) as f64).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let base = auc(&scores, &labels).unwrap();
        let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|s| 2.5 * s + 7.0).collect();
        assert_eq!(auc(&exp_scores, &labels).unwrap(), base);
        assert_eq!(auc(&affine, &labels).unwrap(), base);
    }
}
