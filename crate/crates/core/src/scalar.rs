//! Scalar abstraction shared by the metric and reward code.
//!
//! Everything in [`crate::rewards`] and [`crate::metrics`] is written against
//! [`Real`] so the same code runs in `f32` or `f64`. The simulator is `f64`
//! only.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Converts an `f64` literal. Panics only if the target type cannot
    /// represent finite `f64` values at all, which no supported type does.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length of the input, so results are reproducible across platforms.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        let mut acc = T::zero();
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        None
    } else {
        Some(pairwise_sum(xs) / T::from_count(xs.len()))
    }
}

/// Population variance (divides by `n`).
pub fn population_variance<T: Real>(xs: &[T]) -> Option<T> {
    let m = mean(xs)?;
    let sq: Vec<T> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    Some(pairwise_sum(&sq) / T::from_count(xs.len()))
}

/// Numerically stable logistic function.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
        assert_eq!(pairwise_sum::<f64>(&[]), 0.0);
    }

    #[test]
    fn population_variance_of_two_points() {
        assert_eq!(population_variance(&[0.0f64, 1.0]), Some(0.25));
        assert_eq!(population_variance::<f64>(&[]), None);
    }

    #[test]
    fn sigmoid_is_symmetric_and_saturates() {
        for &x in &[-30.0f64, -1.0, 0.0, 0.5, 40.0] {
            assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert!((logit(sigmoid(0.3f64)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        assert!((sigmoid(0.0f32) - 0.5).abs() < 1e-7);
        assert_eq!(mean(&[1.0f32, 2.0, 3.0]), Some(2.0));
    }
}
