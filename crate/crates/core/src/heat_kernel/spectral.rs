//! Eigenfunction expansion of the Robin kernel.

use super::eigen::{EigenSystem, IntervalEigen};
use crate::domain::{DomainKind, Point};
use crate::error::{Error, Result};
use crate::scalar::Real;

const TAIL: f64 = 1e-12;

/// `Σ_k e^{-λ_k t} φ_k(x) φ_k(y)` on the interval, truncated once
/// `e^{-λ_k t} sup|φ_k|² < 1e-12`.
pub fn interval_spectral<T: Real>(sys: &IntervalEigen<T>, t: T, x: T, y: T) -> Result<T> {
    spectral_sum(sys, t, |k| sys.phi(k, x) * sys.phi(k, y), |k| sys.phi_sup(k).powi(2))
}

/// `∫_a^b` of the interval kernel in its second argument.
pub fn interval_spectral_segment<T: Real>(sys: &IntervalEigen<T>, t: T, x: T, a: T, b: T) -> Result<T> {
    spectral_sum(
        sys,
        t,
        |k| sys.phi(k, x) * sys.phi_integral(k, a, b),
        |k| sys.phi_sup(k).powi(2) * (b - a),
    )
}

fn spectral_sum<T: Real>(
    sys: &IntervalEigen<T>,
    t: T,
    term: impl Fn(usize) -> T,
    bound: impl Fn(usize) -> T,
) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::domain(format!("kernel requires t > 0, got {t}")));
    }
    let mut sum = T::zero();
    for k in 0..sys.len() {
        let decay = (-sys.eigenvalue(k) * t).exp();
        sum = sum + decay * term(k);
        if decay * bound(k) < T::lit(TAIL) {
            return Ok(sum);
        }
    }
    Err(Error::numerical(format!(
        "spectral sum at t = {t} not converged with {} modes",
        sys.len()
    )))
}

/// Spectral kernel on either domain; the square uses the product of the
/// interval expansions in each coordinate.
pub fn kernel_spectral<T: Real>(sys: &EigenSystem<T>, t: T, x: &Point<T>, y: &Point<T>) -> Result<T> {
    let g = |a, b| interval_spectral(&sys.interval, t, a, b);
    match sys.kind {
        DomainKind::Interval => g(x.x, y.x),
        DomainKind::Rectangle => Ok(g(x.x, y.x)? * g(x.y, y.y)?),
    }
}
