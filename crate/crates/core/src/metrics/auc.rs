use std::cmp::Ordering;

use super::{check_pair, MetricsError};
use crate::scalar::Real;

/// Pairwise win counts over all (positive, negative) pairs, with ties
/// counted in halves: `2 * wins + ties`, and the pair count.
pub fn doubled_wins<T: Real>(scores: &[T], labels: &[bool]) -> Result<(u128, u128), MetricsError> {
    check_pair(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricsError::NonFinite);
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut doubled = 0u128;
    let mut neg_below = 0u128;
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        let mut pos = 0u128;
        let mut neg = 0u128;
        let mut j = i;
        while j < order.len() && scores[order[j]] == v {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        doubled += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok((doubled, n_pos * n_neg))
}

/// Probability that a random positive outscores a random negative, ties
/// credited one half. Rank-based, `O(n log n)`, exact for any input size
/// whose pair count fits in an `f64` mantissa.
pub fn auc<T: Real>(scores: &[T], labels: &[bool]) -> Result<T, MetricsError> {
    let (doubled, pairs) = doubled_wins(scores, labels)?;
    Ok(T::lit(doubled as f64) / T::lit(2.0 * pairs as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let mut acc = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if !labels[i] {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if labels[j] {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    acc += 1.0;
                } else if si == sj {
                    acc += 0.5;
                }
            }
        }
        acc / pairs
    }

    #[test]
    fn worked_examples() {
        assert_eq!(auc(&[0.9f64, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3f64; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        let s = [0.2f64, 0.4, 0.4, 0.8];
        let l = [false, true, false, true];
        assert_eq!(brute(&s, &l), 0.875);
        assert_eq!(auc(&s, &l).unwrap(), 0.875);
    }

    #[test]
    fn errors() {
        assert_eq!(auc(&[0.1f64, 0.2], &[true, true]), Err(MetricsError::SingleClass));
        assert!(matches!(auc(&[0.1f64], &[true, false]), Err(MetricsError::LengthMismatch { .. })));
        assert_eq!(auc(&[f64::NAN, 0.2], &[true, false]), Err(MetricsError::NonFinite));
    }

    #[test]
    fn f32_matches_f64() {
        let s = [0.2f32, 0.4, 0.4, 0.8];
        let l = [false, true, false, true];
        assert_eq!(auc(&s, &l).unwrap(), 0.875f32);
    }

    proptest! {
        #[test]
        fn matches_brute_force(data in proptest::collection::vec((0u8..12, any::<bool>()), 2..120)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 11.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let fast = auc(&scores, &labels).unwrap();
            prop_assert!((fast - brute(&scores, &labels)).abs() < 1e-12);
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            prop_assert!((fast + auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
