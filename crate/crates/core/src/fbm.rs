//! Fractional Brownian noise on `[0, T] × S`.

use crate::domain::{SMesh, TimeGrid};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, integrate_graded_left, pair_cell_weight};
use crate::scalar::Real;
use crate::special::gamma;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Hurst parameter in `[1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct Hurst<T>(T);

impl<T: Real> Hurst<T> {
    pub fn new(h: T) -> Result<Self> {
        if h >= T::lit(0.5) && h < T::one() {
            Ok(Self(h))
        } else {
            Err(Error::config(format!("noise.hurst out of range [0.5, 1): {h}")))
        }
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == T::lit(0.5)
    }

    /// Rejects the Brownian case for operations that need `H > 1/2`.
    pub fn require_fractional(self) -> Result<Self> {
        if self.is_brownian() {
            Err(Error::domain("operation requires H > 1/2"))
        } else {
            Ok(self)
        }
    }

    /// `α_H = H (2H - 1)`.
    pub fn alpha(self) -> T {
        self.0 * (T::lit(2.0) * self.0 - T::one())
    }
}

/// `R_H(t, s) = ½ (s^{2H} + t^{2H} - |t - s|^{2H})`.
pub fn cov_rh<T: Real>(h: Hurst<T>, t: T, s: T) -> T {
    let k = T::lit(2.0) * h.value();
    T::lit(0.5) * (s.powf(k) + t.powf(k) - (t - s).abs().powf(k))
}

/// Normalizing constant `C_H`.
pub fn c_h_const<T: Real>(h: Hurst<T>) -> Result<T> {
    let h = h.value();
    if h >= T::lit(0.995) {
        return Err(Error::domain(format!("C_H diverges as H -> 1; got H = {h}")));
    }
    let num = T::lit(2.0) * h * gamma(T::lit(1.5) - h);
    let den = gamma(h + T::lit(0.5)) * gamma(T::lit(2.0) - T::lit(2.0) * h);
    Ok((num / den).sqrt())
}

const TOL: f64 = 1e-13;

/// The square-integrable kernel `K_H(t, s)`, `0 < s < t`.
pub fn k_h_kernel<T: Real>(h: Hurst<T>, t: T, s: T) -> Result<T> {
    if !(s > T::zero() && s < t) {
        return Err(Error::domain(format!("K_H(t, s) requires 0 < s < t, got t = {t}, s = {s}")));
    }
    let c = c_h_const(h)?;
    let hv = h.value();
    let half = T::lit(0.5);
    if h.is_brownian() {
        return Ok(c);
    }
    let inner = integrate_graded_left(
        |u: T| {
            if u <= s {
                return T::zero();
            }
            (u - s).powf(hv - T::lit(1.5)) * (T::one() - (s / u).powf(half - hv))
        },
        s,
        t,
        T::lit(2.0),
        T::lit(TOL),
        T::lit(1e-12),
    )?;
    Ok(c * (t - s).powf(hv - half) + c * (half - hv) * inner)
}

/// `(K* φ)(s)` on `(0, t)`, including the `(H - ½) C_H` normalization.
///
/// Zero outside `(0, t)`.
pub fn kstar_eval<T: Real, F: Fn(T) -> T>(phi: &F, t: T, h: Hurst<T>, s: T) -> Result<T> {
    let h = h.require_fractional()?;
    if s <= T::zero() || s >= t {
        return Ok(T::zero());
    }
    let hv = h.value();
    let half = T::lit(0.5);
    let q = T::one() / (hv - half);
    let span = t - s;
    // r = s + (t - s) v^q absorbs (r - s)^{H - 3/2}
    let integral = integrate_adaptive(
        |v: T| {
            if v <= T::zero() {
                return T::zero();
            }
            let r = s + span * v.powf(q);
            phi(r) * (s / r).powf(half - hv)
        },
        T::zero(),
        T::one(),
        T::lit(TOL),
        T::lit(1e-11),
    )?;
    Ok((hv - half) * c_h_const(h)? * integral * span.powf(hv - half) * q)
}

/// `∫_0^t |(K* φ)(s)|² ds`.
pub fn kstar_norm_sq<T: Real, F: Fn(T) -> T>(phi: &F, t: T, h: Hurst<T>) -> Result<T> {
    let h = h.require_fractional()?;
    let hv = h.value();
    let mid = t * T::lit(0.5);
    let sq = |s: T| kstar_eval(phi, t, h, s).map(|v| v * v);
    let mut failure = None;
    let mut guard = |s: T| match sq(s) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            T::zero()
        }
    };
    // s^{1-2H} at the origin, (t - s)^{2H-1} at the right end
    let left = integrate_graded_left(&mut guard, T::zero(), mid, T::one() / (T::lit(2.0) - T::lit(2.0) * hv), T::lit(TOL), T::lit(1e-10))?;
    let right = crate::quadrature::integrate_graded_right(&mut guard, mid, t, T::one() / hv, T::lit(TOL), T::lit(1e-10))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(left + right),
    }
}

/// Gram matrix `α_H ∫_{I_a} ∫_{I_b} |s - r|^{2H-2}` of the cells between
/// consecutive `edges`, optionally restricted to a window `(lo, hi)`.
///
/// For `H = 1/2` this is the diagonal matrix of cell lengths.
#[derive(Debug, Clone)]
pub struct HGram<T> {
    pub n: usize,
    pub weights: Vec<T>,
}

impl<T: Real> HGram<T> {
    pub fn new(edges: &[T], h: Hurst<T>, window: Option<(T, T)>) -> Result<Self> {
        if let Some((lo, hi)) = window {
            if !(hi > lo) {
                return Err(Error::domain(format!("empty window ({lo}, {hi})")));
            }
        }
        let n = edges.len().saturating_sub(1);
        let kappa = T::lit(2.0) * h.value();
        let clip = |a: T, b: T| match window {
            Some((lo, hi)) => (a.max(lo), b.min(hi)),
            None => (a, b),
        };
        let cells: Vec<(T, T)> = edges.windows(2).map(|w| clip(w[0], w[1])).collect();
        let mut weights = vec![T::zero(); n * n];
        for a in 0..n {
            let (a0, a1) = cells[a];
            if a1 <= a0 {
                continue;
            }
            if h.is_brownian() {
                weights[a * n + a] = a1 - a0;
                continue;
            }
            for b in a..n {
                let (b0, b1) = cells[b];
                if b1 <= b0 {
                    continue;
                }
                let w = h.alpha() * pair_cell_weight(a0, a1, b0, b1, kappa);
                weights[a * n + b] = w;
                weights[b * n + a] = w;
            }
        }
        Ok(Self { n, weights })
    }

    /// Quadratic form `Σ_{a,b} φ_a ψ_b W_{ab}`.
    pub fn bilinear(&self, phi: &[T], psi: &[T]) -> T {
        debug_assert_eq!(phi.len(), self.n);
        phi.iter()
            .enumerate()
            .map(|(a, &pa)| {
                let row = &self.weights[a * self.n..(a + 1) * self.n];
                pa * row.iter().zip(psi).map(|(&w, &p)| w * p).sum::<T>()
            })
            .sum()
    }
}

/// Inner product of `H` for integrands piecewise constant on the grid cells
/// and the `S` cells: `φ[j][a]` is the value on cell `a` of `S` cell `j`.
pub fn h_inner_cells<T: Real>(phi: &[Vec<T>], psi: &[Vec<T>], s_mesh: &SMesh<T>, gram: &HGram<T>) -> T {
    s_mesh
        .cells
        .iter()
        .zip(phi.iter().zip(psi))
        .map(|(c, (p, q))| c.measure * gram.bilinear(p, q))
        .sum()
}

/// `α_H Σ_j μ_j ∬ |s - r|^{2H-2} φ(s, σ_j) ψ(r, σ_j) ds dr` with the
/// integrands sampled at cell midpoints of `grid`.
pub fn h_inner<T: Real, F, G>(phi: F, psi: G, s_mesh: &SMesh<T>, grid: &TimeGrid<T>, h: Hurst<T>) -> Result<T>
where
    F: Fn(T, usize) -> T,
    G: Fn(T, usize) -> T,
{
    let h = h.require_fractional()?;
    let gram = HGram::new(&grid.nodes, h, None)?;
    let sample = |f: &dyn Fn(T, usize) -> T| -> Vec<Vec<T>> {
        s_mesh
            .cells
            .iter()
            .map(|c| grid.nodes.windows(2).map(|w| f((w[0] + w[1]) * T::lit(0.5), c.index)).collect())
            .collect()
    };
    Ok(h_inner_cells(&sample(&phi), &sample(&psi), s_mesh, &gram))
}

/// Sampled noise field `B(σ_j, t_i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePath {
    pub s_mesh: SMesh<f64>,
    pub grid: TimeGrid<f64>,
    /// `values[j][i] = B(σ_j, t_i)`.
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

impl NoisePath {
    /// `ΔB_k^j = B(σ_j, t_{k+1}) - B(σ_j, t_k)`.
    pub fn increments(&self) -> Vec<Vec<f64>> {
        self.values.iter().map(|row| row.windows(2).map(|w| w[1] - w[0]).collect()).collect()
    }

    /// Path whose increments are `inc`, sharing mesh and grid with `self`.
    pub fn with_increments(&self, inc: &[Vec<f64>]) -> Self {
        let values = inc
            .iter()
            .map(|row| {
                std::iter::once(0.0)
                    .chain(row.iter().scan(0.0, |acc, d| {
                        *acc += d;
                        Some(*acc)
                    }))
                    .collect()
            })
            .collect();
        Self { values, ..self.clone() }
    }

    /// The same realization observed on every `factor`-th grid node.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.grid.n_steps.is_multiple_of(factor) {
            return Err(Error::config(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.grid.n_steps
            )));
        }
        let grid = TimeGrid::new(self.grid.horizon, self.grid.n_steps / factor)?;
        let values = self.values.iter().map(|row| row.iter().step_by(factor).copied().collect()).collect();
        Ok(Self { s_mesh: self.s_mesh.clone(), grid, values, seed: self.seed })
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for the `(replica, cell)` pair under a master seed.
pub fn substream(seed: u64, replica: u64, cell: u64) -> ChaCha8Rng {
    let mut tweak = replica;
    let mut state = seed ^ splitmix64(&mut tweak);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(cell);
    rng
}

/// Exact fBm sampler: Cholesky factor of `[R_H(t_i, t_k)]_{i,k ≥ 1}`.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid<f64>,
    hurst: Hurst<f64>,
    chol: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(grid: &TimeGrid<f64>, hurst: Hurst<f64>) -> Result<Self> {
        let n = grid.n_steps;
        let t = &grid.nodes[1..];
        let cov = DMatrix::from_fn(n, n, |i, k| cov_rh(hurst, t[i], t[k]));
        let scale = cov.diagonal().max();
        let mut jitter = 0.0;
        for attempt in 0..8 {
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(c) = m.cholesky() {
                return Ok(Self { grid: grid.clone(), hurst, chol: c.l() });
            }
            jitter = scale * 1e-14 * 10f64.powi(attempt);
        }
        Err(Error::numerical(format!(
            "fBm covariance not positive definite on a grid of {n} steps after regularization"
        )))
    }

    pub fn hurst(&self) -> Hurst<f64> {
        self.hurst
    }

    pub fn grid(&self) -> &TimeGrid<f64> {
        &self.grid
    }

    /// One noise field; cells use disjoint RNG streams.
    pub fn sample(&self, s_mesh: &SMesh<f64>, seed: u64, replica: u64) -> NoisePath {
        let n = self.grid.n_steps;
        let values = s_mesh
            .cells
            .iter()
            .map(|c| {
                let mut rng = substream(seed, replica, c.index as u64);
                let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
                let path = &self.chol * z * c.measure.sqrt();
                std::iter::once(0.0).chain(path.iter().copied()).collect()
            })
            .collect();
        NoisePath { s_mesh: s_mesh.clone(), grid: self.grid.clone(), values, seed }
    }
}
