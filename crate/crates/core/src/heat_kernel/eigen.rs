//! Robin eigenpairs of `-½ d²/dx²` on the unit interval and their tensor
//! products on the unit square.
//!
//! With outward normal derivative, the boundary condition reads
//! `-φ'(0) + βφ(0) = 0` and `φ'(1) + βφ(1) = 0`. Writing `φ = ω cos ωx + β sin ωx`
//! leads to `(ω² - β²) sin ω = 2βω cos ω`, which has exactly one root in each
//! `((k-1)π, kπ)`.

use crate::domain::{DomainKind, DomainSpec, Point};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigenpairs of the interval problem.
#[derive(Debug, Clone)]
pub struct IntervalEigen<T> {
    beta: T,
    omegas: Vec<T>,
    norms: Vec<T>,
}

impl<T: Real> IntervalEigen<T> {
    pub fn new(beta: T, n_modes: usize) -> Result<Self> {
        if !(beta > T::zero()) {
            return Err(Error::config(format!("Robin coefficient must be positive, got {beta}")));
        }
        if n_modes == 0 {
            return Err(Error::config("at least one eigenmode is required"));
        }
        let omegas = (1..=n_modes).map(|k| robin_root(beta, k)).collect::<Result<Vec<T>>>()?;
        let two = T::lit(2.0);
        let norms = omegas
            .iter()
            .map(|&w| {
                let s = w.sin();
                ((w * w + beta * beta) / two + (w * w - beta * beta) * (two * w).sin() / (T::lit(4.0) * w) + beta * s * s)
                    .sqrt()
            })
            .collect();
        Ok(Self { beta, omegas, norms })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn omega(&self, k: usize) -> T {
        self.omegas[k]
    }

    /// `λ_k = ω_k² / 2` (zero-based `k`).
    pub fn eigenvalue(&self, k: usize) -> T {
        let w = self.omegas[k];
        w * w * T::lit(0.5)
    }

    pub fn phi(&self, k: usize, x: T) -> T {
        let w = self.omegas[k];
        (w * (w * x).cos() + self.beta * (w * x).sin()) / self.norms[k]
    }

    pub fn dphi(&self, k: usize, x: T) -> T {
        let w = self.omegas[k];
        w * (-w * (w * x).sin() + self.beta * (w * x).cos()) / self.norms[k]
    }

    /// `∫_a^b φ_k`.
    pub fn phi_integral(&self, k: usize, a: T, b: T) -> T {
        let w = self.omegas[k];
        let prim = |x: T| (w * x).sin() - self.beta / w * (w * x).cos();
        (prim(b) - prim(a)) / self.norms[k]
    }

    /// `sup |φ_k|`.
    pub fn phi_sup(&self, k: usize) -> T {
        let w = self.omegas[k];
        (w * w + self.beta * self.beta).sqrt() / self.norms[k]
    }
}

fn robin_root<T: Real>(beta: T, k: usize) -> Result<T> {
    let pi = T::PI();
    let kf = T::from_usize_lossy(k);
    let f = |w: T| (w * w - beta * beta) / (T::lit(2.0) * beta * w) - w.cos() / w.sin();
    let left = (kf - T::one()) * pi;
    let right = kf * pi;
    // the root can sit closer to either end than any fixed offset, so shrink
    // the offset until the sign is right or it falls below rounding
    let mut offset = T::lit(1e-10) * kf;
    let mut lo = left + offset;
    while !(f(lo) < T::zero()) {
        offset = offset * T::lit(0.01);
        let next = left + offset;
        if next <= left || offset <= T::zero() {
            return Ok(lo);
        }
        lo = next;
    }
    let mut offset = T::lit(1e-10) * kf;
    let mut hi = right - offset;
    while !(f(hi) > T::zero()) {
        offset = offset * T::lit(0.01);
        let next = right - offset;
        if next >= right || offset <= T::zero() {
            return Ok(hi);
        }
        hi = next;
    }
    if !(lo < hi) {
        return Err(Error::numerical(format!("Robin eigenvalue bracket failed for mode {k}")));
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}

/// Robin eigensystem on the interval or the square.
#[derive(Debug, Clone)]
pub struct EigenSystem<T> {
    pub kind: DomainKind,
    pub interval: IntervalEigen<T>,
    /// Index pairs into the interval system, sorted by eigenvalue; the second
    /// index is unused on the interval.
    pub modes: Vec<(usize, usize)>,
}

impl<T: Real> EigenSystem<T> {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eigenvalue(&self, m: usize) -> T {
        let (i, j) = self.modes[m];
        match self.kind {
            DomainKind::Interval => self.interval.eigenvalue(i),
            DomainKind::Rectangle => self.interval.eigenvalue(i) + self.interval.eigenvalue(j),
        }
    }

    pub fn eigenfunction(&self, m: usize, p: &Point<T>) -> T {
        let (i, j) = self.modes[m];
        match self.kind {
            DomainKind::Interval => self.interval.phi(i, p.x),
            DomainKind::Rectangle => self.interval.phi(i, p.x) * self.interval.phi(j, p.y),
        }
    }
}

/// First `n_modes` eigenpairs of `-½Δ` with the Robin condition.
pub fn robin_eigensystem<T: Real>(domain: &DomainSpec<T>, n_modes: usize) -> Result<EigenSystem<T>> {
    let interval = IntervalEigen::new(domain.beta, n_modes)?;
    let modes = match domain.kind {
        DomainKind::Interval => (0..n_modes).map(|i| (i, 0)).collect(),
        DomainKind::Rectangle => {
            let mut pairs: Vec<(usize, usize)> =
                (0..n_modes).flat_map(|i| (0..n_modes).map(move |j| (i, j))).collect();
            let lam = |p: &(usize, usize)| interval.eigenvalue(p.0) + interval.eigenvalue(p.1);
            pairs.sort_by(|a, b| lam(a).partial_cmp(&lam(b)).expect("finite eigenvalues").then(a.cmp(b)));
            pairs.truncate(n_modes);
            pairs
        }
    };
    Ok(EigenSystem { kind: domain.kind, interval, modes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Number of eigenvalues below `lam` of the ghost-point finite-difference
    /// Robin operator, by Sturm sequence.
    fn fd_count_below(beta: f64, n: usize, lam: f64) -> usize {
        let h = 1.0 / n as f64;
        let h2 = h * h;
        // rows 0..=n; boundary rows symmetrized by the factor 1/√2
        let diag = |i: usize| if i == 0 || i == n { (1.0 + h * beta) / h2 } else { 1.0 / h2 };
        let off_sq = |i: usize| {
            // product of the two off-diagonal entries between rows i and i+1
            if i == 0 || i + 1 == n { 0.5 / (h2 * h2) } else { 0.25 / (h2 * h2) }
        };
        let mut count = 0;
        let mut d = diag(0) - lam;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..=n {
            let prev = if d == 0.0 { 1e-300 } else { d };
            d = diag(i) - lam - off_sq(i - 1) / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn fd_eigenvalue(beta: f64, n: usize, k: usize) -> f64 {
        let (mut lo, mut hi) = (0.0, 4.0 * (n * n) as f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if fd_count_below(beta, n, mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn matches_finite_difference_oracle_and_interlaces() {
        let sys = IntervalEigen::new(1.0, 6).unwrap();
        for k in 0..6 {
            let fd = fd_eigenvalue(1.0, 10_000, k + 1);
            assert_relative_eq!(sys.eigenvalue(k), fd, max_relative = 1e-6);
            let neumann = (k as f64 * PI).powi(2) / 2.0;
            let dirichlet = ((k + 1) as f64 * PI).powi(2) / 2.0;
            assert!(neumann < sys.eigenvalue(k) && sys.eigenvalue(k) < dirichlet);
        }
    }

    #[test]
    fn dirichlet_and_neumann_limits() {
        let d = IntervalEigen::new(1e6, 5).unwrap();
        for k in 0..5 {
            let exact = ((k + 1) as f64 * PI).powi(2) / 2.0;
            assert_relative_eq!(d.eigenvalue(k), exact, max_relative = 1e-3);
        }
        let n = IntervalEigen::<f64>::new(1e-6, 3).unwrap();
        assert!(n.eigenvalue(0) < 1e-5);
        let (a, b) = (n.phi(0, 0.0), n.phi(0, 1.0));
        assert!((a - 1.0).abs() < 1e-5 && (b - 1.0).abs() < 1e-5);
    }

    #[test]
    fn orthonormal_and_satisfies_boundary_condition() {
        let beta = 0.7;
        let sys = IntervalEigen::new(beta, 12).unwrap();
        let gl = GaussLegendre::<f64>::new(80);
        for k in 0..12 {
            for m in 0..12 {
                let ip = gl.integrate_composite(|x| sys.phi(k, x) * sys.phi(m, x), 0.0, 1.0, 4);
                let expect = if k == m { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-8, "({k},{m}) {ip}");
            }
            assert!((-sys.dphi(k, 0.0) + beta * sys.phi(k, 0.0)).abs() < 1e-8);
            assert!((sys.dphi(k, 1.0) + beta * sys.phi(k, 1.0)).abs() < 1e-8);
            let seg = gl.integrate(|x| sys.phi(k, x), 0.2, 0.45);
            assert!((sys.phi_integral(k, 0.2, 0.45) - seg).abs() < 1e-12);
        }
    }

    #[test]
    fn large_mode_numbers_bracket() {
        let sys = IntervalEigen::new(2.0, 600).unwrap();
        for k in 1..600 {
            assert!(sys.omega(k) > sys.omega(k - 1));
        }
    }

    #[test]
    fn rectangle_modes_sorted() {
        let d = DomainSpec::build(DomainKind::Rectangle, 1.0, 4).unwrap();
        let sys = robin_eigensystem(&d, 10).unwrap();
        for m in 1..sys.len() {
            assert!(sys.eigenvalue(m) >= sys.eigenvalue(m - 1));
        }
        assert_eq!(sys.modes[0], (0, 0));
        assert_relative_eq!(sys.eigenvalue(0), 2.0 * sys.interval.eigenvalue(0));
    }
}
