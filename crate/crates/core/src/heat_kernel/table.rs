//! Tabulated kernel values for the bound checks.

use super::{KernelMethod, Parametrix, RobinKernel};
use crate::domain::{DomainKind, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::scalar::Real;
use rayon::prelude::*;
use serde::Serialize;

/// A source point `x` paired with a boundary point `ȳ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableEntry<T> {
    pub x: Point<T>,
    pub y: Point<T>,
    pub interior: bool,
}

/// `p_N(t_k, x, ȳ)` over a list of `(x, ȳ)` pairs.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable<T> {
    pub kind: DomainKind,
    pub beta: T,
    pub method: KernelMethod,
    pub truncation: usize,
    pub times: Vec<T>,
    pub entries: Vec<TableEntry<T>>,
    /// `values[k][e]` at `times[k]` and `entries[e]`.
    pub values: Vec<Vec<T>>,
    /// `|∇_x p_N|` by central differences at interior entries, zero elsewhere.
    pub gradients: Vec<Vec<T>>,
}

const FD_STEP: f64 = 1e-5;

impl<T: Real> KernelTable<T> {
    pub fn build(
        kernel: &RobinKernel<T>,
        method: KernelMethod,
        times: &[T],
        entries: Vec<TableEntry<T>>,
        truncation: usize,
    ) -> Result<Self> {
        if times.is_empty() || entries.is_empty() {
            return Err(Error::config("kernel table needs at least one time and one point pair"));
        }
        if method == KernelMethod::Parametrix && kernel.kind() != DomainKind::Interval {
            return Err(Error::Unsupported("parametrix tables exist on the interval only".into()));
        }
        let eval_row = |t: T| -> Result<(Vec<T>, Vec<T>)> {
            let para = match method {
                KernelMethod::Parametrix => Some(Parametrix::new(kernel.beta(), t, truncation)?),
                _ => None,
            };
            let value = |x: &Point<T>, y: &Point<T>| -> Result<T> {
                match (method, &para) {
                    (KernelMethod::Parametrix, Some(p)) => p.eval(x.x, y.x),
                    (KernelMethod::Spectral, _) => match kernel.kind() {
                        DomainKind::Interval => super::spectral::interval_spectral(kernel.interval_eigen(), t, x.x, y.x),
                        DomainKind::Rectangle => Ok(super::spectral::interval_spectral(kernel.interval_eigen(), t, x.x, y.x)?
                            * super::spectral::interval_spectral(kernel.interval_eigen(), t, x.y, y.y)?),
                    },
                    _ => kernel.eval(t, x, y),
                }
            };
            let h = T::lit(FD_STEP);
            let two_h = h + h;
            let mut vals = Vec::with_capacity(entries.len());
            let mut grads = Vec::with_capacity(entries.len());
            for e in &entries {
                vals.push(value(&e.x, &e.y)?);
                let g = if e.interior {
                    let dx = (kernel.eval(t, &Point::new(e.x.x + h, e.x.y), &e.y)?
                        - kernel.eval(t, &Point::new(e.x.x - h, e.x.y), &e.y)?)
                        / two_h;
                    let dy = match kernel.kind() {
                        DomainKind::Interval => T::zero(),
                        DomainKind::Rectangle => {
                            (kernel.eval(t, &Point::new(e.x.x, e.x.y + h), &e.y)?
                                - kernel.eval(t, &Point::new(e.x.x, e.x.y - h), &e.y)?)
                                / two_h
                        }
                    };
                    dx.hypot(dy)
                } else {
                    T::zero()
                };
                grads.push(g);
            }
            Ok((vals, grads))
        };
        let rows: Vec<(Vec<T>, Vec<T>)> = times.par_iter().map(|&t| eval_row(t)).collect::<Result<_>>()?;
        let (values, gradients) = rows.into_iter().unzip();
        Ok(Self {
            kind: kernel.kind(),
            beta: kernel.beta(),
            method,
            truncation,
            times: times.to_vec(),
            entries,
            values,
            gradients,
        })
    }
}

/// Point pairs for the bound checks with corner-adjacent nodes removed.
///
/// Boundary sources are paired with boundary targets; on the square only
/// pairs on a common edge are kept. Interior sources sit at each depth in
/// `depths` along the inward normal of a target's edge.
pub fn corner_excluded_entries<T: Real>(domain: &DomainSpec<T>, depths: &[T]) -> Vec<TableEntry<T>> {
    let targets: Vec<_> = domain.nodes.iter().filter(|n| !n.corner_adjacent).collect();
    let mut out = Vec::new();
    for y in &targets {
        for x in targets.iter().filter(|x| x.edge == y.edge || domain.kind == DomainKind::Interval) {
            out.push(TableEntry { x: x.point, y: y.point, interior: false });
        }
        for x in targets.iter().filter(|x| x.edge == y.edge) {
            for &d in depths {
                let p = x.point;
                let inward = match domain.kind {
                    DomainKind::Interval => Point::on_line(if p.x == T::zero() { d } else { T::one() - d }),
                    DomainKind::Rectangle => match x.edge {
                        crate::domain::Edge::Left => Point::new(d, p.y),
                        crate::domain::Edge::Right => Point::new(T::one() - d, p.y),
                        crate::domain::Edge::Bottom => Point::new(p.x, d),
                        crate::domain::Edge::Top => Point::new(p.x, T::one() - d),
                    },
                };
                out.push(TableEntry { x: inward, y: y.point, interior: true });
            }
        }
    }
    out
}
