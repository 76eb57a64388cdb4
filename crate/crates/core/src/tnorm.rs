//! Fuzzy connectives and the squash function.

use thiserror::Error;

/// Inputs may leave `[0, 1]` by this much before being rejected.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TNormError {
    #[error("truth value {0} outside [0, 1]")]
    DomainError(f64),
    #[error("non-finite input {0}")]
    NonFinite(f64),
}

/// A t-norm: commutative, associative, monotone, with neutral element 1.
/// Negation is `1 - x` and the t-conorm is the De Morgan dual.
pub trait TNorm: Send + Sync {
    fn and(&self, a: f64, b: f64) -> f64;

    /// `(d and/d a, d and/d b)`.
    fn and_partials(&self, a: f64, b: f64) -> (f64, f64);

    fn not(&self, a: f64) -> f64 {
        1.0 - a
    }

    fn or(&self, a: f64, b: f64) -> f64 {
        1.0 - self.and(1.0 - a, 1.0 - b)
    }

    fn or_partials(&self, a: f64, b: f64) -> (f64, f64) {
        self.and_partials(1.0 - a, 1.0 - b)
    }
}

/// `T(x, y) = x * y`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Product;

impl TNorm for Product {
    fn and(&self, a: f64, b: f64) -> f64 {
        a * b
    }

    fn and_partials(&self, a: f64, b: f64) -> (f64, f64) {
        (b, a)
    }
}

fn check(a: f64) -> Result<f64, TNormError> {
    if !a.is_finite() {
        Err(TNormError::NonFinite(a))
    } else if a < -DOMAIN_SLACK || a > 1.0 + DOMAIN_SLACK {
        Err(TNormError::DomainError(a))
    } else {
        Ok(a)
    }
}

/// Product t-norm conjunction with domain checking.
pub fn tnorm_and(a: f64, b: f64) -> Result<f64, TNormError> {
    Ok(Product.and(check(a)?, check(b)?))
}

/// Product t-conorm `1 - (1 - a)(1 - b)` with domain checking.
pub fn tnorm_or(a: f64, b: f64) -> Result<f64, TNormError> {
    Ok(Product.or(check(a)?, check(b)?))
}

pub fn tnorm_not(a: f64) -> Result<f64, TNormError> {
    Ok(Product.not(check(a)?))
}

/// `min(1, max(y, 0))`.
pub fn squash(y: f64) -> Result<f64, TNormError> {
    if y.is_finite() {
        Ok(squash_unchecked(y))
    } else {
        Err(TNormError::NonFinite(y))
    }
}

#[inline]
pub(crate) fn squash_unchecked(y: f64) -> f64 {
    y.clamp(0.0, 1.0)
}

/// Derivative of the squash, taken as 1 on the closed interval `[0, 1]`.
#[inline]
pub fn squash_derivative(y: f64) -> f64 {
    if (0.0..=1.0).contains(&y) {
        1.0
    } else {
        0.0
    }
}
