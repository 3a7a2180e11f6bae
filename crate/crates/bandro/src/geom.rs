//! Axis-aligned box geometry for compact supports.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// A compact axis-aligned box `[lower_1, upper_1] x ... x [lower_m, upper_m]`
/// with strictly positive, finite volume.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBox<T> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> SupportBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("box bounds must be non-empty and match"));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !lo.is_finite() || !hi.is_finite() || *lo >= *hi {
                return Err(Error::invalid(format!(
                    "box requires finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(SupportBox { lower, upper })
    }

    /// One-dimensional interval `[lo, hi]`.
    pub fn interval(lo: T, hi: T) -> Result<Self> {
        SupportBox::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> T {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> T {
        self.lower
            .iter()
            .zip(&self.upper)
            .fold(T::one(), |acc, (lo, hi)| acc * (*hi - *lo))
    }

    /// Closed-box membership.
    pub fn contains(&self, point: &[T]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Grow every side outward by `margin`.
    pub fn inflate(&self, margin: T) -> Self {
        SupportBox {
            lower: self.lower.iter().map(|v| *v - margin).collect(),
            upper: self.upper.iter().map(|v| *v + margin).collect(),
        }
    }

    /// Midpoint of the box.
    pub fn center(&self) -> Vec<T> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (*lo + *hi) / T::c(2.0))
            .collect()
    }
}
