//! The Robin kernel `p_N`: spectral expansion, short-time reflections,
//! parametrix series, tabulation and bound checks.

pub mod bounds;
pub mod eigen;
pub mod images;
pub mod parametrix;
pub mod spectral;
pub mod table;

use crate::domain::{BoundaryNode, DomainKind, DomainSpec, Edge, Point};
use crate::error::Result;
use crate::scalar::Real;
use eigen::IntervalEigen;
use serde::Serialize;

pub use eigen::{robin_eigensystem, EigenSystem};
pub use parametrix::{kernel_parametrix, Parametrix};
pub use spectral::kernel_spectral;

/// Free Gaussian kernel of `½Δ` in dimension `dim` at squared distance `d2`.
pub fn gaussian_kernel<T: Real>(t: T, d2: T, dim: usize) -> T {
    let norm = (T::lit(2.0) * T::PI() * t).powf(T::lit(dim as f64 * 0.5));
    (-d2 / (T::lit(2.0) * t)).exp() / norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMethod {
    Spectral,
    Parametrix,
    /// Reflections below the switch time, spectral above it.
    Hybrid,
}

impl std::str::FromStr for KernelMethod {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "parametrix" => Ok(Self::Parametrix),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(crate::Error::config(format!("unknown kernel method {other}"))),
        }
    }
}

pub const DEFAULT_MODES: usize = 400;
pub const DEFAULT_SWITCH: f64 = 0.02;

/// Production evaluator of `p_N` on both domains.
#[derive(Debug, Clone)]
pub struct RobinKernel<T> {
    kind: DomainKind,
    eigen: IntervalEigen<T>,
    switch: T,
}

impl<T: Real> RobinKernel<T> {
    pub fn new(domain: &DomainSpec<T>) -> Result<Self> {
        Self::with_settings(domain, DEFAULT_MODES, T::lit(DEFAULT_SWITCH))
    }

    pub fn with_settings(domain: &DomainSpec<T>, n_modes: usize, switch: T) -> Result<Self> {
        Ok(Self { kind: domain.kind, eigen: IntervalEigen::new(domain.beta, n_modes)?, switch })
    }

    pub fn beta(&self) -> T {
        self.eigen.beta()
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn interval_eigen(&self) -> &IntervalEigen<T> {
        &self.eigen
    }

    /// Interval kernel `G(t, x, y)`.
    pub fn g1(&self, t: T, x: T, y: T) -> Result<T> {
        if t < self.switch && t > T::zero() {
            Ok(images::interval_images(t, x, y, self.beta()))
        } else {
            spectral::interval_spectral(&self.eigen, t, x, y)
        }
    }

    /// `∫_a^b G(t, x, y) dy`.
    pub fn g1_segment(&self, t: T, x: T, a: T, b: T) -> Result<T> {
        if t < self.switch && t > T::zero() {
            Ok(images::interval_images_segment(t, x, a, b, self.beta()))
        } else {
            spectral::interval_spectral_segment(&self.eigen, t, x, a, b)
        }
    }

    pub fn eval(&self, t: T, x: &Point<T>, y: &Point<T>) -> Result<T> {
        match self.kind {
            DomainKind::Interval => self.g1(t, x.x, y.x),
            DomainKind::Rectangle => Ok(self.g1(t, x.x, y.x)? * self.g1(t, x.y, y.y)?),
        }
    }

    /// `∫_{cell} p_N(t, x, y) σ(dy)` over the boundary cell of `node`.
    pub fn cell_integral(&self, t: T, x: &Point<T>, node: &BoundaryNode<T>) -> Result<T> {
        match self.kind {
            DomainKind::Interval => self.g1(t, x.x, node.point.x),
            DomainKind::Rectangle => {
                let (a, b) = node.segment;
                let (normal, fixed, along) = match node.edge {
                    Edge::Left => (x.x, T::zero(), x.y),
                    Edge::Right => (x.x, T::one(), x.y),
                    Edge::Bottom => (x.y, T::zero(), x.x),
                    Edge::Top => (x.y, T::one(), x.x),
                };
                Ok(self.g1(t, normal, fixed)? * self.g1_segment(t, along, a, b)?)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;

    fn interval(beta: f64) -> DomainSpec<f64> {
        DomainSpec::build(DomainKind::Interval, beta, 1).unwrap()
    }

    #[test]
    fn reflections_agree_with_spectral_at_switch() {
        for &beta in &[0.5, 1.0, 2.0] {
            let k = RobinKernel::new(&interval(beta)).unwrap();
            for &(x, y) in &[(0.0, 0.0), (0.3, 0.0), (0.5, 1.0), (1.0, 1.0), (0.9, 0.2)] {
                let s = spectral::interval_spectral(k.interval_eigen(), 0.02, x, y).unwrap();
                let i = images::interval_images(0.02, x, y, beta);
                assert!((s - i).abs() < 1e-10, "({x},{y}): {s} vs {i}");
            }
        }
    }

    #[test]
    fn segment_integrals_match_quadrature() {
        let k = RobinKernel::new(&interval(1.3)).unwrap();
        let gl = GaussLegendre::<f64>::new(60);
        for &t in &[0.001, 0.01, 0.05, 0.3] {
            for &(x, a, b) in &[(0.0, 0.0, 0.1), (0.4, 0.35, 0.5), (1.0, 0.7, 1.0)] {
                let quad = gl.integrate_composite(|y| k.g1(t, x, y).unwrap(), a, b, 40);
                let closed = k.g1_segment(t, x, a, b).unwrap();
                assert!((quad - closed).abs() < 1e-9 * quad.abs().max(1.0), "t {t} x {x}: {quad} vs {closed}");
            }
        }
    }

    #[test]
    fn mass_is_non_increasing() {
        let k = RobinKernel::new(&interval(1.0)).unwrap();
        let mut last = 1.0;
        for &t in &[0.005, 0.01, 0.05, 0.2, 1.0, 3.0] {
            for &x in &[0.0, 0.5, 0.8] {
                let m = k.g1_segment(t, x, 0.0, 1.0).unwrap();
                assert!(m <= 1.0 + 1e-12);
                if x == 0.5 {
                    assert!(m <= last + 1e-12);
                    last = m;
                }
            }
        }
    }

    #[test]
    fn dominant_mode_decay() {
        let k = RobinKernel::new(&interval(1.0)).unwrap();
        let (t1, t2) = (4.0, 5.0);
        let slope = (k.g1(t2, 0.3, 0.0).unwrap().ln() - k.g1(t1, 0.3, 0.0).unwrap().ln()) / (t2 - t1);
        assert_relative_eq!(-slope, k.interval_eigen().eigenvalue(0), max_relative = 1e-2);
    }

    #[test]
    fn neumann_equilibrium() {
        let k = RobinKernel::new(&interval(1e-6)).unwrap();
        let first_mode = (-std::f64::consts::PI.powi(2) / 2.0).exp();
        for &x in &[0.0, 0.4, 1.0] {
            // with ½Δ the first Neumann mode still carries 2cos(πx)e^{-π²/2} at t = 1
            let expected = 1.0 + 2.0 * (std::f64::consts::PI * x).cos() * first_mode;
            assert!((k.g1(1.0, x, 0.0).unwrap() - expected).abs() < 1e-3);
            assert!((k.g1(2.0, x, 0.0).unwrap() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn chapman_kolmogorov_for_interior_kernel() {
        let k = RobinKernel::new(&interval(0.8)).unwrap();
        let gl = GaussLegendre::<f64>::new(40);
        let (t, s) = (0.05, 0.08);
        for &(x, y) in &[(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            let lhs = k.g1(t + s, x, y).unwrap();
            let rhs = gl.integrate_composite(|z| k.g1(t, x, z).unwrap() * k.g1(s, z, y).unwrap(), 0.0, 1.0, 20);
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn rectangle_factorizes_and_cells_sum() {
        let d = DomainSpec::build(DomainKind::Rectangle, 1.0, 8).unwrap();
        let k = RobinKernel::new(&d).unwrap();
        let x = Point::new(0.3, 0.6);
        let total: f64 = d.nodes.iter().map(|n| k.cell_integral(0.05, &x, n).unwrap()).sum();
        let gl = GaussLegendre::<f64>::new(40);
        let brute: f64 = d
            .nodes
            .iter()
            .map(|n| {
                let (a, b) = n.segment;
                gl.integrate(
                    |s| {
                        let y = match n.edge {
                            Edge::Left => Point::new(0.0, s),
                            Edge::Right => Point::new(1.0, s),
                            Edge::Bottom => Point::new(s, 0.0),
                            Edge::Top => Point::new(s, 1.0),
                        };
                        k.eval(0.05, &x, &y).unwrap()
                    },
                    a,
                    b,
                )
            })
            .sum();
        assert_relative_eq!(total, brute, max_relative = 1e-10);
    }
}
