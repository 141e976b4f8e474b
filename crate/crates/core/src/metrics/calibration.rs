use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_pair, MetricsError};
use crate::scalar::{pairwise_sum, Real};

/// Default number of reliability bins.
pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    #[default]
    EqualWidth,
    EqualMass,
}

impl std::str::FromStr for Binning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal-width" => Ok(Self::EqualWidth),
            "equal-mass" => Ok(Self::EqualMass),
            other => Err(format!("unknown binning '{other}' (expected equal-width or equal-mass)")),
        }
    }
}

/// One row of a reliability table. `conf` and `acc` are 0 for empty bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats<T> {
    pub bin_lo: T,
    pub bin_hi: T,
    pub count: usize,
    pub conf: T,
    pub acc: T,
}

impl<T: Real> BinStats<T> {
    pub fn gap(&self) -> T {
        (self.acc - self.conf).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T> {
    pub ece: T,
    pub bins: Vec<BinStats<T>>,
}

/// Index of the equal-width bin holding `s`: `[i/m, (i+1)/m)`, with the
/// last bin closed at 1. Edges are the values `i/m` as computed in `T`.
pub(crate) fn equal_width_bin<T: Real>(s: T, m: usize) -> usize {
    let mt = T::from_count(m);
    let edge = |i: usize| T::from_count(i) / mt;
    let mut idx = (s * mt).floor().to_usize().unwrap_or(0).min(m - 1);
    while idx > 0 && s < edge(idx) {
        idx -= 1;
    }
    while idx + 1 < m && s >= edge(idx + 1) {
        idx += 1;
    }
    idx
}

fn validate<T: Real>(scores: &[T], labels: &[bool], m: usize) -> Result<(), MetricsError> {
    check_pair(scores, labels)?;
    if m == 0 {
        return Err(MetricsError::BadBins);
    }
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(&s) = scores.iter().find(|&&s| !(s >= T::zero() && s <= T::one())) {
        return Err(MetricsError::ScoreOutOfRange(s.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

fn summarise<T: Real>(members: &[Vec<usize>], edges: &[(T, T)], scores: &[T], labels: &[bool]) -> Calibration<T> {
    let n = T::from_count(scores.len());
    let mut bins = Vec::with_capacity(members.len());
    let mut contrib = Vec::with_capacity(members.len());
    for (idx, &(lo, hi)) in members.iter().zip(edges) {
        let count = idx.len();
        let (conf, acc) = if count == 0 {
            (T::zero(), T::zero())
        } else {
            let c = T::from_count(count);
            let s: Vec<T> = idx.iter().map(|&i| scores[i]).collect();
            let hits = idx.iter().filter(|&&i| labels[i]).count();
            (pairwise_sum(&s) / c, T::from_count(hits) / c)
        };
        let b = BinStats {
            bin_lo: lo,
            bin_hi: hi,
            count,
            conf,
            acc,
        };
        contrib.push(T::from_count(count) / n * b.gap());
        bins.push(b);
    }
    Calibration {
        ece: pairwise_sum(&contrib),
        bins,
    }
}

/// Expected calibration error over `m` equal-width bins.
pub fn ece<T: Real>(scores: &[T], labels: &[bool], m: usize) -> Result<Calibration<T>, MetricsError> {
    ece_with(scores, labels, m, Binning::EqualWidth)
}

pub fn ece_with<T: Real>(
    scores: &[T],
    labels: &[bool],
    m: usize,
    binning: Binning,
) -> Result<Calibration<T>, MetricsError> {
    validate(scores, labels, m)?;
    let (members, edges) = match binning {
        Binning::EqualWidth => {
            let mut members = vec![Vec::new(); m];
            for (i, &s) in scores.iter().enumerate() {
                members[equal_width_bin(s, m)].push(i);
            }
            let mt = T::from_count(m);
            let edges = (0..m)
                .map(|i| (T::from_count(i) / mt, T::from_count(i + 1) / mt))
                .collect();
            (members, edges)
        }
        Binning::EqualMass => equal_mass(scores, m),
    };
    Ok(summarise(&members, &edges, scores, labels))
}

/// Splits the sorted scores into `m` groups of (almost) equal size, keeping
/// tied scores together. Bins are `[first score, next bin's first score)`,
/// the first starting at 0 and the last ending at 1, so fewer than `m` bins
/// come back when ties force merges.
fn equal_mass<T: Real>(scores: &[T], m: usize) -> (Vec<Vec<usize>>, Vec<(T, T)>) {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut starts: Vec<T> = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        let target = rank * m / n;
        let s = scores[i];
        let continues_tie = members.last().is_some() && rank > 0 && scores[order[rank - 1]] == s;
        let new_bin = members.len() <= target && !continues_tie && !(s == T::one() && !members.is_empty());
        if new_bin || members.is_empty() {
            members.push(Vec::new());
            starts.push(if members.len() == 1 { T::zero() } else { s });
        }
        members.last_mut().expect("bin exists").push(i);
    }
    let edges = (0..starts.len())
        .map(|b| (starts[b], starts.get(b + 1).copied().unwrap_or(T::one())))
        .collect();
    (members, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        assert_eq!(ece(&[1.0f64, 1.0], &[true, true], 10).unwrap().ece, 0.0);
        let c = ece(&[0.95f64, 0.95], &[true, false], 10).unwrap();
        assert!((c.ece - 0.45).abs() < 1e-12);
        assert_eq!(c.bins[9].count, 2);
        let c = ece(&[0.05f64, 0.95], &[false, true], 10).unwrap();
        assert!((c.ece - 0.05).abs() < 1e-12);
        assert_eq!(c.bins.iter().filter(|b| b.count > 0).count(), 2);
    }

    #[test]
    fn edges_and_closure() {
        assert_eq!(equal_width_bin(0.0f64, 10), 0);
        assert_eq!(equal_width_bin(0.1f64, 10), 1);
        assert_eq!(equal_width_bin(1.0f64, 10), 9);
        assert_eq!(equal_width_bin(0.0999999f64, 10), 0);
        for i in 0..=100 {
            let s = i as f64 / 100.0;
            let b = equal_width_bin(s, 10);
            let lo = b as f64 / 10.0;
            let hi = (b + 1) as f64 / 10.0;
            assert!(s >= lo && (s < hi || (b == 9 && s <= 1.0)), "{s} -> {b}");
        }
        let c = ece(&[0.0f64, 0.1, 1.0], &[false, false, true], 10).unwrap();
        assert_eq!(c.bins.len(), 10);
        assert_eq!(c.bins[0].bin_lo, 0.0);
        assert_eq!(c.bins[9].bin_hi, 1.0);
        assert_eq!(
            c.bins.iter().map(|b| b.count).collect::<Vec<_>>(),
            vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 1]
        );
    }

    #[test]
    fn errors() {
        assert_eq!(ece::<f64>(&[], &[], 10), Err(MetricsError::EmptyInput));
        assert_eq!(ece(&[0.5f64], &[true], 0), Err(MetricsError::BadBins));
        assert!(matches!(ece(&[1.5f64], &[true], 10), Err(MetricsError::ScoreOutOfRange(_))));
    }

    #[test]
    fn ece_equals_sum_over_own_bins() {
        let s: Vec<f64> = (0..97).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let l: Vec<bool> = (0..97).map(|i| i % 3 == 0).collect();
        for binning in [Binning::EqualWidth, Binning::EqualMass] {
            let c = ece_with(&s, &l, 10, binning).unwrap();
            let total: usize = c.bins.iter().map(|b| b.count).sum();
            assert_eq!(total, 97);
            let recomputed: f64 = c.bins.iter().map(|b| b.count as f64 / 97.0 * b.gap()).sum();
            assert!((c.ece - recomputed).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_when_every_bin_is_exact() {
        // Bin 2 holds {0.25, 0.25, 0.25, 0.25} with one hit; bin 7 holds {0.75} x4 with three.
        let s = [0.25f64, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75];
        let l = [true, false, false, false, true, true, true, false];
        assert_eq!(ece(&s, &l, 10).unwrap().ece, 0.0);
    }

    #[test]
    fn equal_mass_bins() {
        let s: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let l = vec![false; 100];
        let c = ece_with(&s, &l, 10, Binning::EqualMass).unwrap();
        assert_eq!(c.bins.len(), 10);
        assert!(c.bins.iter().all(|b| b.count == 10 && b.bin_lo < b.bin_hi));
        // Heavy ties collapse bins.
        let s = [0.5f64; 20];
        let c = ece_with(&s, &[true; 20], 10, Binning::EqualMass).unwrap();
        assert_eq!(c.bins.len(), 1);
        assert!((c.ece - 0.5).abs() < 1e-15);
        let s = [0.2f64, 1.0, 1.0, 1.0];
        let c = ece_with(&s, &[true; 4], 4, Binning::EqualMass).unwrap();
        assert!(c.bins.iter().all(|b| b.bin_lo < b.bin_hi));
    }
}
