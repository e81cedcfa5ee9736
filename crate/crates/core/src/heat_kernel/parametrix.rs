//! Parametrix series for the Robin kernel on the interval.
//!
//! `p(t, x, ȳ) = 2Γ(t, x, ȳ) + 2 Σ_{n≥1} Σ_z ∫_0^t Γ(t - r, x, z) M_n(r, z, ȳ) dr`
//! with `M_1 = ∂_ν Γ - βΓ` (inward normal) on boundary pairs and
//! `M_{n+1} = M_1 * M_n` the time-boundary convolution. On the interval the
//! boundary is `{0, 1}`, so every `M_n` is determined by its value on equal
//! and on distinct endpoints.
//!
//! Kernels are carried as `m(u) = u K(u²)`, smooth on `[0, √t]`, and
//! convolutions split at the midpoint with `r = q²` and `r = τ - p²` so that
//! both `τ^{-1/2}` endpoint singularities disappear.

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::quadrature::{Chebyshev, GaussLegendre};
use crate::scalar::Real;

const CHEB_NODES: usize = 64;
const GL_NODES: usize = 48;
pub const MAX_TERMS: usize = 6;
pub const MAX_TIME: f64 = 0.25;

fn inv_sqrt_2pi<T: Real>() -> T {
    T::one() / (T::lit(2.0) * T::PI()).sqrt()
}

/// `M_n` on equal (`same`) and distinct (`diff`) endpoints, as `u M_n(u²)`.
#[derive(Debug, Clone)]
enum Layer<T> {
    First { beta: T },
    Fitted { same: Chebyshev<T>, diff: Chebyshev<T> },
}

impl<T: Real> Layer<T> {
    fn same(&self, u: T) -> T {
        match self {
            Layer::First { beta } => -*beta * inv_sqrt_2pi::<T>(),
            Layer::Fitted { same, .. } => same.eval(u),
        }
    }

    fn diff(&self, u: T) -> T {
        match self {
            Layer::First { beta } => {
                if u <= T::zero() {
                    return T::zero();
                }
                let u2 = u * u;
                inv_sqrt_2pi::<T>() * (T::one() / u2 - *beta) * (-T::one() / (T::lit(2.0) * u2)).exp()
            }
            Layer::Fitted { diff, .. } => diff.eval(u),
        }
    }
}

/// Parametrix series at a fixed time.
#[derive(Debug, Clone)]
pub struct Parametrix<T> {
    beta: T,
    t: T,
    layers: Vec<Layer<T>>,
    gl: GaussLegendre<T>,
}

impl<T: Real> Parametrix<T> {
    /// Builds `M_1, …, M_{n_terms}` on `[0, t]`. `β = 0` is admitted as the
    /// pure reflection case.
    pub fn new(beta: T, t: T, n_terms: usize) -> Result<Self> {
        if !(t > T::zero() && t <= T::lit(MAX_TIME)) {
            return Err(Error::domain(format!("parametrix requires 0 < t <= {MAX_TIME}, got {t}")));
        }
        if n_terms > MAX_TERMS {
            return Err(Error::domain(format!("parametrix supports at most {MAX_TERMS} terms, got {n_terms}")));
        }
        if beta < T::zero() {
            return Err(Error::domain("parametrix requires beta >= 0"));
        }
        let gl = GaussLegendre::new(GL_NODES);
        let mut layers: Vec<Layer<T>> = Vec::with_capacity(n_terms);
        if n_terms > 0 {
            layers.push(Layer::First { beta });
        }
        let first = Layer::First { beta };
        let umax = t.sqrt();
        let nodes = Chebyshev::nodes(T::zero(), umax, CHEB_NODES);
        for _ in 1..n_terms {
            let prev = layers.last().expect("at least one layer");
            let mut same = Vec::with_capacity(CHEB_NODES);
            let mut diff = Vec::with_capacity(CHEB_NODES);
            for &u in &nodes {
                let tau = u * u;
                // same_{n+1} = S*S_n + D*D_n, diff_{n+1} = S*D_n + D*S_n
                let ss = convolve(&gl, |v| first.same(v), |v| prev.same(v), tau);
                let dd = convolve(&gl, |v| first.diff(v), |v| prev.diff(v), tau);
                let sd = convolve(&gl, |v| first.same(v), |v| prev.diff(v), tau);
                let ds = convolve(&gl, |v| first.diff(v), |v| prev.same(v), tau);
                same.push(u * (ss + dd));
                diff.push(u * (sd + ds));
            }
            layers.push(Layer::Fitted {
                same: Chebyshev::from_values(T::zero(), umax, &same),
                diff: Chebyshev::from_values(T::zero(), umax, &diff),
            });
        }
        Ok(Self { beta, t, layers, gl })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// The leading term `2Γ(t, x, ȳ)` followed by the `n_terms` series terms.
    pub fn terms(&self, x: T, ybar: T) -> Result<Vec<T>> {
        let ybar_is_right = boundary_side(ybar)?;
        let t = self.t;
        let two = T::lit(2.0);
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(two * gauss(t, x - ybar));
        for layer in &self.layers {
            let term: T = [false, true]
                .into_iter()
                .map(|z_is_right| {
                    let z = if z_is_right { T::one() } else { T::zero() };
                    let d2 = (x - z) * (x - z);
                    let g = |p: T| {
                        if p <= T::zero() {
                            if d2 > T::zero() { T::zero() } else { inv_sqrt_2pi::<T>() }
                        } else {
                            inv_sqrt_2pi::<T>() * (-d2 / (two * p * p)).exp()
                        }
                    };
                    if z_is_right == ybar_is_right {
                        convolve(&self.gl, g, |v| layer.same(v), t)
                    } else {
                        convolve(&self.gl, g, |v| layer.diff(v), t)
                    }
                })
                .sum();
            out.push(two * term);
        }
        Ok(out)
    }

    /// Sum of the series; fails when the terms stop decreasing.
    pub fn eval(&self, x: T, ybar: T) -> Result<T> {
        let terms = self.terms(x, ybar)?;
        let total: T = terms.iter().copied().sum();
        let floor = T::lit(1e-14) * total.abs();
        for n in 2..terms.len().saturating_sub(1) {
            let (a, b) = (terms[n].abs(), terms[n + 1].abs());
            if b > a && b > floor {
                return Err(Error::NonConvergence {
                    iterations: n + 1,
                    reason: format!("parametrix terms grow at n = {n}; use a smaller t"),
                    history: terms.iter().map(|v| v.as_f64()).collect(),
                });
            }
        }
        Ok(total)
    }
}

fn boundary_side<T: Real>(ybar: T) -> Result<bool> {
    if ybar == T::zero() {
        Ok(false)
    } else if ybar == T::one() {
        Ok(true)
    } else {
        Err(Error::domain(format!("parametrix target must be a boundary point, got {ybar}")))
    }
}

fn gauss<T: Real>(t: T, d: T) -> T {
    inv_sqrt_2pi::<T>() / t.sqrt() * (-(d * d) / (T::lit(2.0) * t)).exp()
}

/// `∫_0^τ K_a(τ - r) K_b(r) dr` with `K(s) = m(√s)/√s`.
fn convolve<T: Real>(gl: &GaussLegendre<T>, ma: impl Fn(T) -> T, mb: impl Fn(T) -> T, tau: T) -> T {
    if tau <= T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    let edge = (tau / two).sqrt();
    let ka = |s: T| ma(s.sqrt()) / s.sqrt();
    let kb = |s: T| mb(s.sqrt()) / s.sqrt();
    let first = gl.integrate(|q| two * mb(q) * ka(tau - q * q), T::zero(), edge);
    let second = gl.integrate(|p| two * ma(p) * kb(tau - p * p), T::zero(), edge);
    first + second
}

/// Parametrix value of the Robin kernel on the interval.
pub fn kernel_parametrix<T: Real>(domain: &DomainSpec<T>, t: T, x: T, ybar: T, n_terms: usize) -> Result<T> {
    if domain.kind != DomainKind::Interval {
        return Err(Error::Unsupported("parametrix series is implemented on the interval only".into()));
    }
    Parametrix::new(domain.beta, t, n_terms)?.eval(x, ybar)
}
