use serde::{Deserialize, Serialize};

use super::calibration::equal_width_bin;
use super::{check_pair, MetricsError};
use crate::scalar::{mean, pairwise_sum, Real};

pub const DEFAULT_HIST_BINS: usize = 20;

/// Per-class score histograms and how much the two distributions overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation<T> {
    pub edges: Vec<(T, T)>,
    pub pos_counts: Vec<usize>,
    pub neg_counts: Vec<usize>,
    pub pos_mean: Option<T>,
    pub neg_mean: Option<T>,
    /// `sum_b min(p+_b, p-_b)` over normalised histograms; `None` if a class is empty.
    pub overlap: Option<T>,
}

pub fn separation_report<T: Real>(
    scores: &[T],
    labels: &[bool],
    n_bins: usize,
) -> Result<Separation<T>, MetricsError> {
    check_pair(scores, labels)?;
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if n_bins == 0 {
        return Err(MetricsError::BadBins);
    }
    if let Some(&s) = scores.iter().find(|&&s| !(s >= T::zero() && s <= T::one())) {
        return Err(MetricsError::ScoreOutOfRange(s.to_f64().unwrap_or(f64::NAN)));
    }
    let mut pos_counts = vec![0usize; n_bins];
    let mut neg_counts = vec![0usize; n_bins];
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &l) in scores.iter().zip(labels) {
        let b = equal_width_bin(s, n_bins);
        if l {
            pos_counts[b] += 1;
            pos.push(s);
        } else {
            neg_counts[b] += 1;
            neg.push(s);
        }
    }
    let overlap = if pos.is_empty() || neg.is_empty() {
        None
    } else {
        let np = T::from_count(pos.len());
        let nn = T::from_count(neg.len());
        let mins: Vec<T> = pos_counts
            .iter()
            .zip(&neg_counts)
            .map(|(&p, &n)| (T::from_count(p) / np).min(T::from_count(n) / nn))
            .collect();
        Some(pairwise_sum(&mins))
    };
    let bt = T::from_count(n_bins);
    Ok(Separation {
        edges: (0..n_bins)
            .map(|i| (T::from_count(i) / bt, T::from_count(i + 1) / bt))
            .collect(),
        pos_counts,
        neg_counts,
        pos_mean: mean(&pos),
        neg_mean: mean(&neg),
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_and_identical() {
        let r = separation_report(&[1.0f64, 1.0, 0.0, 0.0], &[true, true, false, false], 20).unwrap();
        assert_eq!(r.overlap, Some(0.0));
        assert_eq!(r.pos_mean, Some(1.0));
        let r = separation_report(&[0.3f64, 0.7, 0.7, 0.3], &[true, true, false, false], 20).unwrap();
        assert!((r.overlap.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hand_enumerated_masses() {
        // Width 0.05: 0.8 -> bin 16, 0.9 -> 18 for positives; 0.85 -> 17, 0.1 -> 2 for negatives.
        let r = separation_report(&[0.8f64, 0.9, 0.85, 0.1], &[true, true, false, false], 20).unwrap();
        let occupied = |c: &[usize]| c.iter().enumerate().filter(|(_, &n)| n > 0).map(|(i, _)| i).collect::<Vec<_>>();
        assert_eq!(occupied(&r.pos_counts), vec![16, 18]);
        assert_eq!(occupied(&r.neg_counts), vec![2, 17]);
        assert_eq!(r.overlap, Some(0.0));
        // Moving one negative into bin 16 shares half of each mass.
        let r = separation_report(&[0.8f64, 0.9, 0.82, 0.1], &[true, true, false, false], 20).unwrap();
        assert_eq!(r.overlap, Some(0.5));
    }

    #[test]
    fn errors_and_single_class() {
        assert!(matches!(
            separation_report(&[1.2f64], &[true], 20),
            Err(MetricsError::ScoreOutOfRange(_))
        ));
        assert_eq!(separation_report::<f64>(&[], &[], 20), Err(MetricsError::EmptyInput));
        let r = separation_report(&[0.2f64], &[true], 20).unwrap();
        assert_eq!(r.overlap, None);
        assert_eq!(r.neg_mean, None);
    }
}
