//! Empirical constants for the kernel estimates, plus the singular boundary
//! integral and the elementary inequality `x^α e^{-x} ≤ α^α e^{-α}`.

use super::table::KernelTable;
use crate::domain::{DomainKind, DomainSpec, Edge, Point};
use crate::error::{Error, Result};
use crate::quadrature::integrate_graded_offset;
use crate::scalar::Real;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// `p ≤ c t^{-μ} |x - ȳ|^{2μ-d}`
    Upper,
    /// `p ≥ C₁ t^{-d/2} exp(-C₂ |x - ȳ|² / t)`
    Lower,
    /// `|∇p| ≤ k^{-1} exp(-k |x - ȳ|²/t) t^{-(d+1)/2}`, largest `k ≤ 1`
    GradientGaussian,
    /// `|∇p| ≤ k |x - ȳ|^{2μ-d} t^{-(2μ+1)/2}`
    GradientAlgebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstPoint {
    pub t: f64,
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub mode: BoundMode,
    pub mu: f64,
    pub constant: f64,
    /// `C₂` for the lower bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary: Option<f64>,
    pub worst_point: WorstPoint,
    pub satisfied: bool,
}

/// Fixed Gaussian rate used by the lower-bound check.
pub const DEFAULT_LOWER_RATE: f64 = 1.0;

fn worst<T: Real>(t: T, x: &Point<T>, y: &Point<T>) -> WorstPoint {
    WorstPoint { t: t.as_f64(), x: [x.x.as_f64(), x.y.as_f64()], y: [y.x.as_f64(), y.y.as_f64()] }
}

/// Fits the constant of the requested estimate over the table.
pub fn verify_kernel_bounds<T: Real>(table: &KernelTable<T>, mode: BoundMode, mu: T) -> Result<BoundReport> {
    verify_kernel_bounds_with(table, mode, mu, T::lit(DEFAULT_LOWER_RATE))
}

pub fn verify_kernel_bounds_with<T: Real>(
    table: &KernelTable<T>,
    mode: BoundMode,
    mu: T,
    lower_rate: T,
) -> Result<BoundReport> {
    if table.times.is_empty() || table.entries.is_empty() {
        return Err(Error::config("bound check on an empty table"));
    }
    let needs_mu = matches!(mode, BoundMode::Upper | BoundMode::GradientAlgebraic);
    if needs_mu && !(mu > T::lit(0.5) && mu < T::one()) {
        return Err(Error::config(format!("mu must lie in (1/2, 1), got {mu}")));
    }
    let d = T::from_usize_lossy(table.kind.dim());
    let two = T::lit(2.0);
    // (t, entry index, |x - y|, value)
    let samples = table.times.iter().enumerate().flat_map(|(k, &t)| {
        table.entries.iter().enumerate().map(move |(e, entry)| (k, t, e, entry.x.dist(&entry.y)))
    });
    let report = |constant: T, secondary: Option<T>, at: Option<WorstPoint>, satisfied: bool| BoundReport {
        mode,
        mu: mu.as_f64(),
        constant: constant.as_f64(),
        secondary: secondary.map(|v| v.as_f64()),
        worst_point: at.unwrap_or(WorstPoint { t: f64::NAN, x: [f64::NAN; 2], y: [f64::NAN; 2] }),
        satisfied,
    };
    match mode {
        BoundMode::Upper | BoundMode::GradientAlgebraic | BoundMode::Lower => {
            let mut best: Option<(T, WorstPoint)> = None;
            for (k, t, e, r) in samples {
                let entry = &table.entries[e];
                let (value, envelope) = match mode {
                    BoundMode::Upper => {
                        if r == T::zero() {
                            continue;
                        }
                        (table.values[k][e], t.powf(-mu) * r.powf(two * mu - d))
                    }
                    BoundMode::GradientAlgebraic => {
                        if !entry.interior {
                            continue;
                        }
                        (table.gradients[k][e], r.powf(two * mu - d) * t.powf(-(two * mu + T::one()) / two))
                    }
                    _ => (table.values[k][e], t.powf(-d / two) * (-lower_rate * r * r / t).exp()),
                };
                let ratio = value / envelope;
                let better = match (&best, mode) {
                    (None, _) => true,
                    (Some((b, _)), BoundMode::Lower) => ratio < *b,
                    (Some((b, _)), _) => ratio > *b,
                };
                if better {
                    best = Some((ratio, worst(t, &entry.x, &entry.y)));
                }
            }
            let (c, at) = best.ok_or_else(|| Error::config("no admissible table entries for this bound"))?;
            let satisfied = c.is_finite() && (mode != BoundMode::Lower || c > T::zero());
            let secondary = (mode == BoundMode::Lower).then_some(lower_rate);
            Ok(report(c, secondary, Some(at), satisfied))
        }
        BoundMode::GradientGaussian => {
            let points: Vec<(usize, T, usize, T)> = samples.filter(|&(_, _, e, _)| table.entries[e].interior).collect();
            if points.is_empty() {
                return Err(Error::config("gradient bound needs interior table entries"));
            }
            let envelope = |kk: T, t: T, r: T| (-kk * r * r / t).exp() / kk * t.powf(-(d + T::one()) / two);
            let violation = |kk: T| {
                points
                    .iter()
                    .map(|&(k, t, e, r)| (table.gradients[k][e] / envelope(kk, t, r), k, e))
                    .fold((T::zero(), 0, 0), |acc, v| if v.0 > acc.0 { v } else { acc })
            };
            let holds = |kk: T| violation(kk).0 <= T::one();
            let (mut lo, mut hi) = (T::zero(), T::one());
            if holds(hi) {
                lo = hi;
            } else {
                for _ in 0..200 {
                    let mid = (lo + hi) / two;
                    if holds(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            let probe = if lo > T::zero() { lo } else { hi };
            let (_, k, e) = violation(probe);
            let entry = &table.entries[e];
            Ok(report(lo, None, Some(worst(table.times[k], &entry.x, &entry.y)), lo > T::zero()))
        }
    }
}

fn edge_point<T: Real>(edge: Edge, s: T) -> Point<T> {
    match edge {
        Edge::Left => Point::new(T::zero(), s),
        Edge::Right => Point::new(T::one(), s),
        Edge::Bottom => Point::new(s, T::zero()),
        Edge::Top => Point::new(s, T::one()),
    }
}

/// Edge and parameter of a boundary point of the unit square.
fn locate<T: Real>(p: &Point<T>) -> Vec<(Edge, T)> {
    let eps = T::lit(1e-14);
    let mut out = Vec::new();
    if p.x.abs() <= eps {
        out.push((Edge::Left, p.y));
    }
    if (p.x - T::one()).abs() <= eps {
        out.push((Edge::Right, p.y));
    }
    if p.y.abs() <= eps {
        out.push((Edge::Bottom, p.x));
    }
    if (p.y - T::one()).abs() <= eps {
        out.push((Edge::Top, p.x));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Singular {
    None,
    X,
    Xi,
}

/// `∫_{∂D} |x - y|^{-a} |y - ξ|^{-b} σ(dy)` on the unit square, with graded
/// substitutions at the singular points.
pub fn singular_boundary_integral<T: Real>(domain: &DomainSpec<T>, a: T, b: T, x: &Point<T>, xi: &Point<T>) -> Result<T> {
    if domain.kind != DomainKind::Rectangle {
        return Err(Error::Unsupported("singular boundary integral is defined on the square".into()));
    }
    if a < T::zero() || b < T::zero() || a >= T::one() || b >= T::one() {
        return Err(Error::domain(format!("exponents must lie in [0, 1), got a = {a}, b = {b}")));
    }
    if (a + b - T::one()).abs() < T::lit(1e-12) {
        return Err(Error::domain("a + b = d - 1 is the logarithmic borderline case"));
    }
    let (lx, lxi) = (locate(x), locate(xi));
    if lx.is_empty() || lxi.is_empty() {
        return Err(Error::domain("x and xi must lie on the boundary"));
    }
    let tol = T::lit(1e-12);
    let power = |r: T, e: T| if e == T::zero() { T::one() } else { r.powf(-e) };
    let mut total = T::zero();
    for edge in [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left] {
        // breakpoints tagged with the singular point they carry
        let mut cuts: Vec<(T, Singular)> = vec![(T::zero(), Singular::None), (T::one(), Singular::None)];
        for (tag, located, p) in [(Singular::X, &lx, x), (Singular::Xi, &lxi, xi)] {
            for (e, s) in located.iter() {
                if *e == edge {
                    cuts.push((*s, tag));
                }
            }
            // a corner coinciding with the singular point also cuts the adjacent edge
            for end in [T::zero(), T::one()] {
                if edge_point(edge, end).dist(p) < T::lit(1e-14) && !located.iter().any(|(e, _)| *e == edge) {
                    cuts.push((end, tag));
                }
            }
        }
        cuts.sort_by(|u, v| u.0.partial_cmp(&v.0).expect("finite"));
        let mut merged: Vec<(T, Singular)> = Vec::new();
        for c in cuts {
            match merged.last_mut() {
                Some(last) if (last.0 - c.0).abs() < T::lit(1e-15) => {
                    if last.1 == Singular::None {
                        last.1 = c.1;
                    }
                }
                _ => merged.push(c),
            }
        }
        for w in merged.windows(2) {
            let ((s0, t0), (s1, t1)) = (w[0], w[1]);
            let mid = (s0 + s1) / T::lit(2.0);
            // distances from a point at offset u from the cut, exact for the cut's own point
            let integrand = |s: T, u: T, tag: Singular| {
                let p = edge_point(edge, s);
                let dx = if tag == Singular::X { u } else { x.dist(&p) };
                let dxi = if tag == Singular::Xi { u } else { xi.dist(&p) };
                power(dx, a) * power(dxi, b)
            };
            let grading = |tag: Singular| match tag {
                Singular::X => T::one() / (T::one() - a),
                Singular::Xi => T::one() / (T::one() - b),
                Singular::None => T::one(),
            };
            total = total + integrate_graded_offset(|u| integrand(s0 + u, u, t0), mid - s0, grading(t0), tol, tol)?;
            total = total + integrate_graded_offset(|u| integrand(s1 - u, u, t1), s1 - mid, grading(t1), tol, tol)?;
        }
    }
    Ok(total)
}

/// `x^α e^{-x}`.
pub fn analytic_bound<T: Real>(alpha: T, x: T) -> Result<T> {
    if !(alpha > T::zero() && x > T::zero()) {
        return Err(Error::domain("analytic bound requires alpha > 0 and x > 0"));
    }
    Ok(x.powf(alpha) * (-x).exp())
}

/// The maximum `α^α e^{-α}` of [`analytic_bound`] over `x > 0`.
pub fn analytic_bound_max<T: Real>(alpha: T) -> T {
    alpha.powf(alpha) * (-alpha).exp()
}
