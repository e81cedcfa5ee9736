//! Discretized problem shared by the stochastic convolution, the solver and
//! the Malliavin calculus: domain, kernel, grids, noise and lag weights.

use crate::domain::{DomainKind, DomainSpec, Point, SMesh, TimeGrid};
use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, Hurst, NoisePath};
use crate::heat_kernel::{RobinKernel, DEFAULT_MODES, DEFAULT_SWITCH};
use crate::stoch_conv::AlphaCoefficient;
use crate::volterra::LagWeights;
use rayon::prelude::*;

/// Parameters of a discretized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: DomainKind,
    pub beta: f64,
    pub boundary_resolution: usize,
    pub horizon: f64,
    pub n_steps: usize,
    pub s_cells: usize,
    pub s_measure: f64,
    pub hurst: f64,
    pub alpha: AlphaCoefficient,
    pub n_modes: usize,
}

impl ModelSpec {
    /// Interval, `β = 1`, `T = 1`, 100 steps, two `S` cells, `H = 0.75`, `α ≡ 1`.
    pub fn interval() -> Self {
        Self {
            kind: DomainKind::Interval,
            beta: 1.0,
            boundary_resolution: 1,
            horizon: 1.0,
            n_steps: 100,
            s_cells: 2,
            s_measure: 1.0,
            hurst: 0.75,
            alpha: AlphaCoefficient::constant(1.0),
            n_modes: DEFAULT_MODES,
        }
    }
}

/// Cell-averaged convolution integrand
/// `Φ_m(p, σ) = Δt⁻¹ Σ_l A_m(p, l) α(σ, ȳ_l)` for a set of source points.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub n_lags: usize,
    pub n_points: usize,
    pub n_s: usize,
    values: Vec<f64>,
}

impl PhiTable {
    fn new(weights: &LagWeights, alpha: &[Vec<f64>]) -> Self {
        let n_s = alpha.len();
        let mut values = Vec::with_capacity(weights.n_lags * weights.n_points * n_s);
        for m in 0..weights.n_lags {
            for p in 0..weights.n_points {
                for row in alpha {
                    let s: f64 = row.iter().enumerate().map(|(l, a)| weights.a(m, p, l) * a).sum();
                    values.push(s / weights.dt);
                }
            }
        }
        Self { n_lags: weights.n_lags, n_points: weights.n_points, n_s, values }
    }

    #[inline]
    pub fn get(&self, m: usize, p: usize, sigma: usize) -> f64 {
        self.values[(m * self.n_points + p) * self.n_s + sigma]
    }

    /// `D_{r,σ} Z(t_i, x_p)` on the grid cells `k < n_cells`, zero for `k ≥ i`.
    pub fn cells(&self, p: usize, i: usize, n_cells: usize) -> Vec<Vec<f64>> {
        (0..self.n_s)
            .map(|sigma| (0..n_cells).map(|k| if k < i { self.get(i - 1 - k, p, sigma) } else { 0.0 }).collect())
            .collect()
    }
}

/// Source points together with their lag weights and convolution integrand.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<Point<f64>>,
    pub weights: LagWeights,
    pub phi: PhiTable,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub domain: DomainSpec<f64>,
    pub kernel: RobinKernel<f64>,
    pub grid: TimeGrid<f64>,
    pub s_mesh: SMesh<f64>,
    pub hurst: Hurst<f64>,
    /// `α(σ_j, ȳ_l)` indexed `[j][l]`.
    pub alpha: Vec<Vec<f64>>,
    pub boundary: PointSet,
    pub sampler: FbmSampler,
}

impl Model {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        let hurst = Hurst::new(spec.hurst)?;
        let domain = DomainSpec::build(spec.kind, spec.beta, spec.boundary_resolution)?;
        spec.alpha.validate(hurst, domain.dim())?;
        let kernel = RobinKernel::with_settings(&domain, spec.n_modes, DEFAULT_SWITCH)?;
        let grid = TimeGrid::new(spec.horizon, spec.n_steps)?;
        let s_mesh = SMesh::uniform(spec.s_cells, spec.s_measure)?;
        let alpha = spec.alpha.matrix(&s_mesh, &domain);
        let sampler = FbmSampler::new(&grid, hurst)?;
        let points: Vec<_> = domain.nodes.iter().map(|n| n.point).collect();
        let boundary = Self::point_set_with(&kernel, &domain, &grid, &alpha, points)?;
        Ok(Self { spec, domain, kernel, grid, s_mesh, hurst, alpha, boundary, sampler })
    }

    fn point_set_with(
        kernel: &RobinKernel<f64>,
        domain: &DomainSpec<f64>,
        grid: &TimeGrid<f64>,
        alpha: &[Vec<f64>],
        points: Vec<Point<f64>>,
    ) -> Result<PointSet> {
        let weights = LagWeights::compute(kernel, domain, &points, grid.dt(), grid.n_steps)?;
        let phi = PhiTable::new(&weights, alpha);
        Ok(PointSet { points, weights, phi })
    }

    /// Lag weights and integrand for interior points.
    pub fn interior(&self, points: &[Point<f64>]) -> Result<PointSet> {
        if let Some(p) = points.iter().find(|p| self.domain.boundary_distance(p) <= 0.0) {
            return Err(Error::domain(format!(
                "point ({}, {}) is not interior; use the boundary field",
                p.x, p.y
            )));
        }
        Self::point_set_with(&self.kernel, &self.domain, &self.grid, &self.alpha, points.to_vec())
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn sample_noise(&self, seed: u64, replica: u64) -> NoisePath {
        self.sampler.sample(&self.s_mesh, seed, replica)
    }

    /// Grid index of `t`, or a domain error when `t` is off the grid.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.grid
            .index_of(t)
            .ok_or_else(|| Error::domain(format!("t = {t} is not a node of the time grid")))
    }
}

const CHUNK: usize = 64;

/// `Σ_r f(r)` over `0..replicas`, summed in an order independent of the
/// number of worker threads.
pub fn par_replica_sum<F>(replicas: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let chunks: Vec<Vec<f64>> = (0..replicas.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                for (a, v) in acc.iter_mut().zip(f(r)) {
                    *a += v;
                }
            }
            acc
        })
        .collect();
    chunks.into_iter().fold(vec![0.0; width], |mut acc, c| {
        for (a, v) in acc.iter_mut().zip(c) {
            *a += v;
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_table_for_unit_alpha_is_kernel_average() {
        let mut spec = ModelSpec::interval();
        spec.n_steps = 10;
        spec.horizon = 0.1;
        let m = Model::new(spec).unwrap();
        let dt = m.dt();
        for lag in 0..10 {
            for p in 0..2 {
                let expect = (m.boundary.weights.a(lag, p, 0) + m.boundary.weights.a(lag, p, 1)) / dt;
                assert_eq!(m.boundary.phi.get(lag, p, 0), expect);
                assert_eq!(m.boundary.phi.get(lag, p, 1), expect);
            }
        }
    }

    #[test]
    fn boundary_points_are_rejected_as_interior() {
        let mut spec = ModelSpec::interval();
        spec.n_steps = 4;
        let m = Model::new(spec).unwrap();
        assert!(matches!(m.interior(&[Point::on_line(0.0)]), Err(Error::Domain(_))));
        assert!(m.interior(&[Point::on_line(0.3)]).is_ok());
    }
}
