//! Geometry of the two supported domains, time grids and the mesh on `S`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// The unit interval `(0, 1)`; its boundary is the two endpoints.
    Interval,
    /// The unit square `(0, 1)²`.
    Rectangle,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        }
    }
}

impl std::str::FromStr for DomainKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(DomainKind::Interval),
            "rectangle" => Ok(DomainKind::Rectangle),
            other => Err(Error::config(format!("domain.kind must be interval or rectangle, got {other}"))),
        }
    }
}

/// A point of `D̄`. For the interval only `x` is used and `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn on_line(x: T) -> Self {
        Self { x, y: T::zero() }
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Side of the boundary a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Edge {
    /// `x = 0`
    Left,
    /// `x = 1`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = 1`
    Top,
}

impl Edge {
    /// True when the edge is a vertical side, i.e. the free coordinate is `y`.
    pub fn is_vertical(self) -> bool {
        matches!(self, Edge::Left | Edge::Right)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryNode<T> {
    pub point: Point<T>,
    pub edge: Edge,
    /// Parameter range of the boundary cell along its edge; degenerate for the interval.
    pub segment: (T, T),
    pub corner_adjacent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec<T> {
    pub kind: DomainKind,
    pub beta: T,
    pub resolution: usize,
    pub nodes: Vec<BoundaryNode<T>>,
    pub weights: Vec<T>,
}

impl<T: Real> DomainSpec<T> {
    /// Builds the boundary mesh; `boundary_resolution` is the number of
    /// midpoint cells per rectangle edge and is ignored for the interval.
    pub fn build(kind: DomainKind, beta: T, boundary_resolution: usize) -> Result<Self> {
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::config(format!("domain.beta must be positive, got {beta}")));
        }
        let (nodes, weights) = match kind {
            DomainKind::Interval => {
                let mk = |x: T, edge| BoundaryNode {
                    point: Point::on_line(x),
                    edge,
                    segment: (x, x),
                    corner_adjacent: false,
                };
                (vec![mk(T::zero(), Edge::Left), mk(T::one(), Edge::Right)], vec![T::one(); 2])
            }
            DomainKind::Rectangle => {
                if boundary_resolution == 0 {
                    return Err(Error::config("domain.boundary_resolution must be at least 1"));
                }
                let m = boundary_resolution;
                let h = T::one() / T::from_usize_lossy(m);
                let mut nodes = Vec::with_capacity(4 * m);
                for edge in [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left] {
                    for k in 0..m {
                        let lo = h * T::from_usize_lossy(k);
                        let hi = if k + 1 == m { T::one() } else { lo + h };
                        let s = (lo + hi) * T::lit(0.5);
                        let point = match edge {
                            Edge::Bottom => Point::new(s, T::zero()),
                            Edge::Top => Point::new(s, T::one()),
                            Edge::Left => Point::new(T::zero(), s),
                            Edge::Right => Point::new(T::one(), s),
                        };
                        nodes.push(BoundaryNode {
                            point,
                            edge,
                            segment: (lo, hi),
                            corner_adjacent: k == 0 || k + 1 == m,
                        });
                    }
                }
                let weights = nodes.iter().map(|n| n.segment.1 - n.segment.0).collect();
                (nodes, weights)
            }
        };
        Ok(Self { kind, beta, resolution: boundary_resolution, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `|∂D|`: 2 for the interval (counting measure), 4 for the square.
    pub fn boundary_measure(&self) -> T {
        match self.kind {
            DomainKind::Interval => T::lit(2.0),
            DomainKind::Rectangle => T::lit(4.0),
        }
    }

    pub fn contains_on_boundary(&self, p: &Point<T>) -> bool {
        let eps = T::lit(1e-12);
        let on = |v: T| v.abs() <= eps || (v - T::one()).abs() <= eps;
        let inside = |v: T| v >= -eps && v <= T::one() + eps;
        match self.kind {
            DomainKind::Interval => on(p.x) && p.y == T::zero(),
            DomainKind::Rectangle => (on(p.x) && inside(p.y)) || (on(p.y) && inside(p.x)),
        }
    }

    /// Distance from `p` to the boundary.
    pub fn boundary_distance(&self, p: &Point<T>) -> T {
        let dx = p.x.min(T::one() - p.x);
        match self.kind {
            DomainKind::Interval => dx,
            DomainKind::Rectangle => dx.min(p.y).min(T::one() - p.y),
        }
    }

    /// `Σ_j w_j f(ξ_j)`.
    pub fn boundary_quadrature<F: FnMut(&Point<T>) -> T>(&self, mut f: F) -> T {
        self.nodes.iter().zip(&self.weights).map(|(n, &w)| w * f(&n.point)).sum()
    }
}

/// Uniform grid `0 = t_0 < … < t_N = T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid<T> {
    pub horizon: T,
    pub n_steps: usize,
    pub nodes: Vec<T>,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, n_steps: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::config(format!("time.horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::config("time.steps must be at least 1"));
        }
        let dt = horizon / T::from_usize_lossy(n_steps);
        let mut nodes: Vec<T> = (0..=n_steps).map(|i| dt * T::from_usize_lossy(i)).collect();
        nodes[n_steps] = horizon;
        Ok(Self { horizon, n_steps, nodes })
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n_steps)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the grid node equal to `t` (up to rounding), if any.
    pub fn index_of(&self, t: T) -> Option<usize> {
        let k = (t / self.dt()).round();
        let i = k.to_usize()?;
        (i <= self.n_steps && (self.nodes[i] - t).abs() <= T::lit(1e-9) * self.horizon).then_some(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SCell<T> {
    pub index: usize,
    pub measure: T,
    /// Representative point of the cell in `S = [0, total_measure]`.
    pub midpoint: T,
}

/// Finite partition of the mark space `S` with its measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SMesh<T> {
    pub cells: Vec<SCell<T>>,
    pub total_measure: T,
}

impl<T: Real> SMesh<T> {
    /// `n` equal cells of `S = [0, total]` with Lebesgue measure.
    pub fn uniform(n: usize, total: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("noise.s_cells must be at least 1"));
        }
        if !(total > T::zero()) {
            return Err(Error::config("total measure of S must be positive"));
        }
        let w = total / T::from_usize_lossy(n);
        let cells = (0..n)
            .map(|index| SCell {
                index,
                measure: w,
                midpoint: w * (T::from_usize_lossy(index) + T::lit(0.5)),
            })
            .collect();
        Ok(Self { cells, total_measure: total })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}
