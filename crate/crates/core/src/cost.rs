//! Extended-real cost values.
//!
//! All objectives in this crate live on the extended nonnegative reals:
//! a constraint violation costs `+∞`, everything else is a finite power.
//! [`Cost`] wraps `f64` and keeps the two rules the algorithms rely on:
//! `∞ + x = ∞` and `min(∞, x) = x`. `NaN` is rejected at construction so
//! comparisons are total in practice.

use core::cmp::Ordering;
use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign};

/// A cost: a finite `f64` or `+∞`. Never `NaN`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Cost(f64);

impl Cost {
    pub const ZERO: Cost = Cost(0.0);
    pub const INFINITE: Cost = Cost(f64::INFINITY);

    /// Wraps a value. Panics (debug builds) on `NaN`.
    #[inline]
    pub fn new(value: f64) -> Cost {
        debug_assert!(!value.is_nan(), "cost must not be NaN");
        Cost(value)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// The raw `f64`, `+∞` included.
    #[inline]
    pub fn raw(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn min(self, other: Cost) -> Cost {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    /// Total order; safe because `NaN` is excluded.
    #[inline]
    pub fn cmp_total(self, other: Cost) -> Ordering {
        self.0.partial_cmp(&other.0).expect("costs are never NaN")
    }
}

impl Add for Cost {
    type Output = Cost;
    #[inline]
    fn add(self, rhs: Cost) -> Cost {
        // inf + finite and inf + inf both yield inf; no NaN can appear
        // because costs are never -inf.
        Cost(self.0 + rhs.0)
    }
}

impl AddAssign for Cost {
    #[inline]
    fn add_assign(&mut self, rhs: Cost) {
        self.0 += rhs.0;
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |acc, c| acc + c)
    }
}

impl From<f64> for Cost {
    #[inline]
    fn from(value: f64) -> Cost {
        Cost::new(value)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_addition() {
        assert_eq!(Cost::INFINITE + Cost::new(3.0), Cost::INFINITE);
        assert_eq!(Cost::new(3.0) + Cost::INFINITE, Cost::INFINITE);
        assert_eq!(Cost::INFINITE + Cost::INFINITE, Cost::INFINITE);
    }

    #[test]
    fn min_prefers_finite() {
        assert_eq!(Cost::INFINITE.min(Cost::new(2.0)), Cost::new(2.0));
        assert_eq!(Cost::new(2.0).min(Cost::INFINITE), Cost::new(2.0));
        assert_eq!(Cost::new(1.0).min(Cost::new(2.0)), Cost::new(1.0));
    }

    #[test]
    fn sum_of_costs() {
        let total: Cost = [1.0, 2.5, 0.5].iter().map(|&v| Cost::new(v)).sum();
        assert_eq!(total, Cost::new(4.0));
        let total: Cost = [Cost::new(1.0), Cost::INFINITE].into_iter().sum();
        assert!(total.is_infinite());
    }
}
