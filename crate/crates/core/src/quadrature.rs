//! Quadrature rules: fixed Gauss–Legendre, adaptive Gauss–Kronrod,
//! graded substitutions for endpoint singularities, exact cell weights for
//! the `|s - r|^(2H-2)` kernel, and Chebyshev interpolation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = T::lit(-x);
            nodes[n - 1 - i] = T::lit(x);
            weights[i] = T::lit(w);
            weights[n - 1 - i] = T::lit(w);
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> T {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T, panels: usize) -> T {
        let h = (b - a) / T::from_usize_lossy(panels);
        (0..panels)
            .map(|k| {
                let lo = a + h * T::from_usize_lossy(k);
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Globally adaptive 15-point Gauss–Kronrod integration.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate_adaptive<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<T> {
    const MAX_INTERVALS: usize = 4000;
    if a == b {
        return Ok(T::zero());
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: T = parts.iter().map(|p| p.2).sum();
        let err: T = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::numerical("non-finite value in adaptive quadrature"));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= MAX_INTERVALS {
            return Err(Error::numerical(format!(
                "adaptive quadrature on [{a}, {b}] stalled with error estimate {err:e}"
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = (lo + hi) * T::lit(0.5);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

/// `∫_0^len f(u) du` for integrands singular like `u^(-γ)` at `u = 0`.
///
/// Substitutes `u = len v^q`, which makes the integrand smooth when
/// `q (1 - γ) ≥ 1` is an integer. Passing the offset `u` rather than the
/// absolute abscissa keeps the distance to the singular point exact.
pub fn integrate_graded_offset<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    len: T,
    q: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<T> {
    integrate_adaptive(
        |v: T| {
            let u = len * v.powf(q);
            if u <= T::zero() {
                return T::zero();
            }
            f(u) * len * q * v.powf(q - T::one())
        },
        T::zero(),
        T::one(),
        abs_tol,
        rel_tol,
    )
}

/// `∫_a^b f` with a singular point at `a`; see [`integrate_graded_offset`].
pub fn integrate_graded_left<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    q: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<T> {
    integrate_graded_offset(|u| f(a + u), b - a, q, abs_tol, rel_tol)
}

/// `∫_a^b f` with a singular point at `b`.
pub fn integrate_graded_right<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    q: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<T> {
    integrate_graded_offset(|u| f(b - u), b - a, q, abs_tol, rel_tol)
}

/// `∫_a^b ∫_c^d |s - r|^(κ-2) dr ds` in closed form, for `κ ∈ (1, 2]`.
///
/// Valid for overlapping and disjoint intervals alike.
pub fn pair_cell_weight<T: Real>(a: T, b: T, c: T, d: T, kappa: T) -> T {
    let g = |x: T| x.abs().powf(kappa) / (kappa * (kappa - T::one()));
    g(b - c) + g(a - d) - g(b - d) - g(a - c)
}

/// Chebyshev interpolant on `[a, b]` built from values at first-kind nodes.
#[derive(Debug, Clone)]
pub struct Chebyshev<T> {
    a: T,
    b: T,
    coeffs: Vec<T>,
}

impl<T: Real> Chebyshev<T> {
    pub fn nodes(a: T, b: T, n: usize) -> Vec<T> {
        (0..n)
            .map(|k| {
                let theta = T::PI() * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(n);
                (a + b) * T::lit(0.5) + (b - a) * T::lit(0.5) * theta.cos()
            })
            .collect()
    }

    /// Fits from `values[k] = f(nodes(a, b, n)[k])`.
    pub fn from_values(a: T, b: T, values: &[T]) -> Self {
        let n = values.len();
        let nf = T::from_usize_lossy(n);
        let coeffs = (0..n)
            .map(|j| {
                let s: T = values
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let theta = T::PI() * T::from_usize_lossy(j)
                            * (T::from_usize_lossy(k) + T::lit(0.5))
                            / nf;
                        v * theta.cos()
                    })
                    .sum();
                let scale = if j == 0 { T::one() } else { T::lit(2.0) };
                s * scale / nf
            })
            .collect();
        Self { a, b, coeffs }
    }

    pub fn fit<F: FnMut(T) -> T>(a: T, b: T, n: usize, f: F) -> Self {
        let values: Vec<T> = Self::nodes(a, b, n).into_iter().map(f).collect();
        Self::from_values(a, b, &values)
    }

    /// Clenshaw evaluation; arguments are clamped to `[a, b]`.
    pub fn eval(&self, x: T) -> T {
        let x = x.max(self.a).min(self.b);
        let u = (T::lit(2.0) * x - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (T::zero(), T::zero());
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = T::lit(2.0) * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coeffs[0]
    }

    pub fn tail_magnitude(&self) -> T {
        self.coeffs.iter().rev().take(3).map(|c| c.abs()).fold(T::zero(), T::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::<f64>::new(10);
        let v = gl.integrate(|x| x.powi(19) + 3.0 * x.powi(6), -1.0, 2.0);
        let exact = (2f64.powi(20) - 1.0) / 20.0 + 3.0 * (2f64.powi(7) + 1.0) / 7.0;
        assert_relative_eq!(v, exact, max_relative = 1e-13);
        let w: f64 = GaussLegendre::<f64>::new(33).integrate(|_| 1.0, -1.0, 1.0);
        assert_relative_eq!(w, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_legendre_f32() {
        let gl = GaussLegendre::<f32>::new(8);
        let v = gl.integrate(|x| x.exp(), 0.0, 1.0);
        assert!((v - (1f32.exp() - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn adaptive_handles_graded_singularity() {
        // ∫_0^1 x^{-0.7} dx = 1/0.3
        let v = integrate_graded_left(|x: f64| x.powf(-0.7), 0.0, 1.0, 10.0, 1e-14, 1e-12).unwrap();
        assert_relative_eq!(v, 1.0 / 0.3, max_relative = 1e-10);
        let w = integrate_graded_right(|x: f64| (1.0 - x).powf(-0.5), 0.0, 1.0, 2.0, 1e-10, 1e-10)
            .unwrap();
        assert_relative_eq!(w, 2.0, max_relative = 1e-10);
    }

    #[test]
    fn adaptive_smooth() {
        let v = integrate_adaptive(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(v, std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn pair_weight_matches_brute_force() {
        let kappa = 1.5;
        let exact = pair_cell_weight(0.0, 1.0, 0.0, 1.0, kappa);
        // ∫∫_{[0,1]^2} |s-r|^{-1/2} = 2/(κ(κ-1)) = 8/3
        assert_relative_eq!(exact, 8.0 / 3.0, max_relative = 1e-14);
        let disjoint = pair_cell_weight(0.0, 0.5, 2.0, 3.0, kappa);
        let gl = GaussLegendre::<f64>::new(30);
        let brute = gl.integrate(|s| gl.integrate(|r| (r - s).powf(kappa - 2.0), 2.0, 3.0), 0.0, 0.5);
        assert_relative_eq!(disjoint, brute, max_relative = 1e-12);
        assert_relative_eq!(pair_cell_weight(0.0, 0.5, 2.0, 3.0, kappa), pair_cell_weight(2.0, 3.0, 0.0, 0.5, kappa), max_relative = 1e-15);
    }

    #[test]
    fn chebyshev_reproduces_smooth_function() {
        let c = Chebyshev::fit(0.0, 0.5, 40, |u: f64| (-1.0 / (2.0 * u * u)).exp() / (u * u).max(1e-300));
        for &u in &[0.1, 0.23, 0.37, 0.5] {
            let exact = (-1.0f64 / (2.0 * u * u)).exp() / (u * u);
            assert!((c.eval(u) - exact).abs() < 1e-9);
        }
    }
}
