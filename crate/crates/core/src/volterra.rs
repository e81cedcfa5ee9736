//! Product-integration weights for Volterra operators with the Robin kernel.
//!
//! For a source point `x`, boundary cell `j` and lag `m`,
//! `B_m = ∫_{mΔt}^{(m+1)Δt} P(τ) (τ/Δt - m) dτ` and
//! `C_m = ∫_{mΔt}^{(m+1)Δt} P(τ) ((m+1) - τ/Δt) dτ`, where
//! `P(τ) = ∫_{cell j} p_N(τ, x, y) σ(dy)`. A piecewise-linear integrand in
//! time then integrates exactly:
//! `∫_0^{t_i} P(t_i - s) f(s) ds ≈ Σ_{k<i} B_{i-1-k} f_k + C_{i-1-k} f_{k+1}`.

use crate::domain::{DomainSpec, Point};
use crate::error::Result;
use crate::heat_kernel::RobinKernel;
use crate::quadrature::integrate_adaptive;
use rayon::prelude::*;

const ABS_TOL: f64 = 1e-14;
const REL_TOL: f64 = 1e-11;

/// Lag weights for a set of source points against all boundary cells.
#[derive(Debug, Clone)]
pub struct LagWeights {
    pub n_lags: usize,
    pub n_points: usize,
    pub n_cells: usize,
    pub dt: f64,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl LagWeights {
    pub fn compute(
        kernel: &RobinKernel<f64>,
        domain: &DomainSpec<f64>,
        points: &[Point<f64>],
        dt: f64,
        n_lags: usize,
    ) -> Result<Self> {
        let n_cells = domain.len();
        let per_point: Vec<Vec<(f64, f64)>> = points
            .par_iter()
            .map(|x| {
                let mut out = Vec::with_capacity(n_lags * n_cells);
                for m in 0..n_lags {
                    for node in &domain.nodes {
                        out.push(lag_pair(|tau| kernel.cell_integral(tau, x, node), dt, m)?);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let n_points = points.len();
        let mut b = vec![0.0; n_lags * n_points * n_cells];
        let mut c = vec![0.0; n_lags * n_points * n_cells];
        for (i, row) in per_point.iter().enumerate() {
            for m in 0..n_lags {
                for j in 0..n_cells {
                    let (bv, cv) = row[m * n_cells + j];
                    let idx = (m * n_points + i) * n_cells + j;
                    b[idx] = bv;
                    c[idx] = cv;
                }
            }
        }
        Ok(Self { n_lags, n_points, n_cells, dt, b, c })
    }

    #[inline]
    fn idx(&self, m: usize, i: usize, j: usize) -> usize {
        (m * self.n_points + i) * self.n_cells + j
    }

    /// Weight of the left time node of the lag-`m` interval.
    #[inline]
    pub fn b(&self, m: usize, i: usize, j: usize) -> f64 {
        self.b[self.idx(m, i, j)]
    }

    /// Weight of the right time node of the lag-`m` interval.
    #[inline]
    pub fn c(&self, m: usize, i: usize, j: usize) -> f64 {
        self.c[self.idx(m, i, j)]
    }

    /// `A_m = B_m + C_m = ∫_{mΔt}^{(m+1)Δt} P(τ) dτ`.
    #[inline]
    pub fn a(&self, m: usize, i: usize, j: usize) -> f64 {
        let k = self.idx(m, i, j);
        self.b[k] + self.c[k]
    }

    /// `Σ_{k<i} Σ_j B_{i-1-k} f[k][j] + C_{i-1-k} f[k+1][j]` for point `p`.
    pub fn apply(&self, p: usize, f: &[Vec<f64>], i: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..i {
            let m = i - 1 - k;
            let (lo, hi) = (&f[k], &f[k + 1]);
            for j in 0..self.n_cells {
                let idx = self.idx(m, p, j);
                acc += self.b[idx] * lo[j] + self.c[idx] * hi[j];
            }
        }
        acc
    }
}

/// `(B_m, C_m)` for a single kernel-in-time function.
fn lag_pair<F: Fn(f64) -> Result<f64>>(kernel: F, dt: f64, m: usize) -> Result<(f64, f64)> {
    let mut failure = None;
    let mut eval = |tau: f64| match kernel(tau) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let mf = m as f64;
    let out = if m == 0 {
        // τ = Δt v² absorbs the τ^{-1/2} blow-up of boundary-to-boundary kernels
        let b = integrate_adaptive(|v| if v > 0.0 { eval(dt * v * v) * v * v * 2.0 * dt * v } else { 0.0 }, 0.0, 1.0, ABS_TOL, REL_TOL)?;
        let c = integrate_adaptive(|v| if v > 0.0 { eval(dt * v * v) * (1.0 - v * v) * 2.0 * dt * v } else { 0.0 }, 0.0, 1.0, ABS_TOL, REL_TOL)?;
        (b, c)
    } else {
        let (lo, hi) = (mf * dt, (mf + 1.0) * dt);
        let cut = crate::heat_kernel::DEFAULT_SWITCH;
        let pieces: Vec<(f64, f64)> = if lo < cut && cut < hi { vec![(lo, cut), (cut, hi)] } else { vec![(lo, hi)] };
        let mut b = 0.0;
        let mut c = 0.0;
        for (p0, p1) in pieces {
            b += integrate_adaptive(|tau| eval(tau) * (tau / dt - mf), p0, p1, ABS_TOL, REL_TOL)?;
            c += integrate_adaptive(|tau| eval(tau) * ((mf + 1.0) - tau / dt), p0, p1, ABS_TOL, REL_TOL)?;
        }
        (b, c)
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `∫_0^t P(τ) dτ` by a single adaptive rule, independent of the lag split.
pub fn cumulative_cell_integral<F: Fn(f64) -> Result<f64>>(kernel: F, t: f64) -> Result<f64> {
    let mut failure = None;
    let v = integrate_adaptive(
        |w: f64| {
            if w <= 0.0 {
                return 0.0;
            }
            match kernel(t * w * w) {
                Ok(k) => k * 2.0 * t * w,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        1e-15,
        1e-13,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainKind;

    #[test]
    fn linear_integrands_are_exact() {
        let d = DomainSpec::build(DomainKind::Interval, 1.0, 1).unwrap();
        let k = RobinKernel::new(&d).unwrap();
        let dt = 0.01;
        let pts = [Point::on_line(0.0), Point::on_line(0.4)];
        let w = LagWeights::compute(&k, &d, &pts, dt, 30).unwrap();
        let i = 30;
        let t = i as f64 * dt;
        // f(s) = 1 + 2s on both cells
        let f: Vec<Vec<f64>> = (0..=i).map(|k| vec![1.0 + 2.0 * k as f64 * dt; 2]).collect();
        for (p, x) in pts.iter().enumerate() {
            let got = w.apply(p, &f, i);
            let mut expect = 0.0;
            for node in &d.nodes {
                let c1 = cumulative_cell_integral(|tau| k.cell_integral(tau, x, node), t).unwrap();
                // ∫_0^t P(τ)(1 + 2(t - τ)) dτ
                let m1 = crate::quadrature::integrate_adaptive(
                    |v: f64| if v > 0.0 { k.cell_integral(t * v * v, x, node).unwrap() * t * v * v * 2.0 * t * v } else { 0.0 },
                    0.0,
                    1.0,
                    1e-15,
                    1e-13,
                )
                .unwrap();
                expect += (1.0 + 2.0 * t) * c1 - 2.0 * m1;
            }
            assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
        }
    }

    #[test]
    fn weights_are_nonnegative() {
        let d = DomainSpec::build(DomainKind::Rectangle, 1.0, 3).unwrap();
        let k = RobinKernel::new(&d).unwrap();
        let pts: Vec<_> = d.nodes.iter().map(|n| n.point).collect();
        let w = LagWeights::compute(&k, &d, &pts, 0.02, 5).unwrap();
        for m in 0..5 {
            for i in 0..pts.len() {
                for j in 0..d.len() {
                    assert!(w.b(m, i, j) >= 0.0 && w.c(m, i, j) >= 0.0);
                }
            }
        }
    }
}
