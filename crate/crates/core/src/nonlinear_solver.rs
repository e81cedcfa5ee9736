//! Picard iteration for the boundary Volterra equation
//! `u(t,ξ) = Z(t,ξ) + ∫_0^t ∫_{∂D} p_N(t-s, ξ, ȳ) g(u(s,ȳ)) σ(dȳ) ds`
//! and the interior representation of the solution.

use crate::domain::Point;
use crate::error::{Error, Result};
use crate::fbm::NoisePath;
use crate::model::{Model, PointSet};
use crate::stats;
use crate::stoch_conv::{z_at, z_field};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    Zero,
    Constant(f64),
    Linear(f64),
    Tanh,
    /// `L tanh(u / max(L, 1))`
    ScaledTanh(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Smoothness {
    /// Lipschitz only.
    G1,
    /// Bounded derivatives of every order used.
    G2,
}

/// Nonlinearity `g` with derivatives up to order four.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nonlinearity {
    pub kind: NonlinearityKind,
    pub lipschitz: f64,
    pub smoothness: Smoothness,
    /// Bound on `|∂ⁿg|`, `2 ≤ n ≤ 4`, under (g2).
    pub derivative_bound: f64,
}

/// `tanh` and its first four derivatives.
fn tanh_derivative(u: f64, n: usize) -> f64 {
    let t = u.tanh();
    let s = 1.0 - t * t;
    match n {
        0 => t,
        1 => s,
        2 => -2.0 * t * s,
        3 => s * (6.0 * t * t - 2.0),
        4 => t * s * (16.0 - 24.0 * t * t),
        _ => f64::NAN,
    }
}

pub const MAX_DERIVATIVE: usize = 4;

impl Nonlinearity {
    pub fn new(kind: NonlinearityKind) -> Result<Self> {
        let (lipschitz, derivative_bound) = match kind {
            NonlinearityKind::Zero => (0.0, 0.0),
            NonlinearityKind::Constant(c) => (c.abs(), 0.0),
            NonlinearityKind::Linear(c) => (c.abs(), 0.0),
            // max |tanh⁽ⁿ⁾| for n = 2, 3, 4 is 0.770, 2, 4.086
            NonlinearityKind::Tanh => (1.0, 4.1),
            NonlinearityKind::ScaledTanh(l) => {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(Error::config(format!("g.scale must be positive, got {l}")));
                }
                let a = l.max(1.0);
                (l / a, 4.1 * l / a.powi(2))
            }
        };
        if !lipschitz.is_finite() {
            return Err(Error::config("g coefficients must be finite"));
        }
        Ok(Self { kind, lipschitz, smoothness: Smoothness::G2, derivative_bound })
    }

    pub fn zero() -> Self {
        Self::new(NonlinearityKind::Zero).expect("zero nonlinearity")
    }

    pub fn tanh() -> Self {
        Self::new(NonlinearityKind::Tanh).expect("tanh nonlinearity")
    }

    /// Restricts the capability to (g1).
    pub fn lipschitz_only(self) -> Self {
        Self { smoothness: Smoothness::G1, ..self }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.derivative(u, 0)
    }

    /// `∂ⁿg(u)` for `n ≤ 4`.
    pub fn derivative(&self, u: f64, n: usize) -> f64 {
        match self.kind {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Constant(c) => {
                if n == 0 {
                    c
                } else {
                    0.0
                }
            }
            NonlinearityKind::Linear(c) => match n {
                0 => c * u,
                1 => c,
                _ => 0.0,
            },
            NonlinearityKind::Tanh => tanh_derivative(u, n),
            NonlinearityKind::ScaledTanh(l) => {
                let a = l.max(1.0);
                l * a.powi(-(n as i32)) * tanh_derivative(u / a, n)
            }
        }
    }

    /// Checks `|∂g| ≤ L`, `|g(u)| ≤ L(1 + |u|)` and, under (g2), the
    /// higher-derivative bound on a grid of `[-50, 50]`.
    pub fn check_hypotheses(&self) -> Result<()> {
        let tol = 1e-12;
        for k in 0..=10_000 {
            let u = -50.0 + k as f64 * 0.01;
            let growth = self.lipschitz.max(self.value(0.0).abs()) * (1.0 + u.abs());
            if self.derivative(u, 1).abs() > self.lipschitz + tol || self.value(u).abs() > growth + tol {
                return Err(Error::config(format!("g violates the Lipschitz hypothesis at u = {u}")));
            }
            if self.smoothness == Smoothness::G2
                && (2..=MAX_DERIVATIVE).any(|n| self.derivative(u, n).abs() > self.derivative_bound + tol)
            {
                return Err(Error::config(format!("g violates its derivative bound at u = {u}")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for NonlinearityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(NonlinearityKind::Zero),
            "constant" => Ok(NonlinearityKind::Constant(1.0)),
            "linear" => Ok(NonlinearityKind::Linear(1.0)),
            "tanh" => Ok(NonlinearityKind::Tanh),
            "scaled_tanh" => Ok(NonlinearityKind::ScaledTanh(1.0)),
            other => Err(Error::config(format!(
                "g.kind must be zero, constant, linear, tanh or scaled_tanh, got {other}"
            ))),
        }
    }
}

/// `(Σ_i Δt e^{-λ t_i} Σ_j w_j |f_i^j|^p)^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorm {
    pub lambda: f64,
    pub p: f64,
}

impl WeightedNorm {
    /// `λ = 50 / T`, `p = 2`.
    pub fn default_for(horizon: f64) -> Self {
        Self { lambda: 50.0 / horizon, p: 2.0 }
    }

    pub fn eval(&self, model: &Model, f: &[Vec<f64>]) -> f64 {
        let dt = model.dt();
        let s: f64 = f
            .iter()
            .zip(&model.grid.nodes)
            .map(|(row, t)| {
                let inner: f64 = row.iter().zip(&model.domain.weights).map(|(v, w)| w * v.abs().powf(self.p)).sum();
                dt * (-self.lambda * t).exp() * inner
            })
            .sum();
        s.powf(1.0 / self.p)
    }
}

/// Solution on the boundary nodes, `values[i][j] = u(t_i, ξ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryField {
    pub times: Vec<f64>,
    pub nodes: Vec<Point<f64>>,
    pub values: Vec<Vec<f64>>,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardReport {
    pub iterates: usize,
    pub increment_norms: Vec<f64>,
    pub lambda: f64,
    pub p: f64,
    pub converged: bool,
    /// `u_{n+1} - u_n` for every iterate, kept for re-weighting.
    #[serde(skip)]
    pub increments: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub norm: WeightedNorm,
}

impl SolverSettings {
    pub fn default_for(horizon: f64) -> Self {
        Self { tol: 1e-10, max_iter: 200, norm: WeightedNorm::default_for(horizon) }
    }
}

/// `(V f)(t_i, x_p) = Σ_{k<i} Σ_l B_{i-1-k} f_k^l + C_{i-1-k} f_{k+1}^l` for all `i`, `p`.
pub fn volterra_apply(set: &PointSet, f: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..f.len())
        .into_par_iter()
        .map(|i| (0..set.len()).map(|p| set.weights.apply(p, f, i)).collect())
        .collect()
}

fn map_field(f: &[Vec<f64>], g: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
    f.iter().map(|row| row.iter().map(|&v| g(v)).collect()).collect()
}

fn add_fields(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

fn sub_fields(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

/// Right-hand side `Z + V g(u)` of the boundary equation.
pub fn boundary_map(model: &Model, g: &Nonlinearity, z: &[Vec<f64>], u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    add_fields(z, &volterra_apply(&model.boundary, &map_field(u, |v| g.value(v))))
}

/// Picard iteration from `u_0 = Z` until the weighted increment norm drops below `tol`.
pub fn picard_boundary(
    model: &Model,
    g: &Nonlinearity,
    noise: &NoisePath,
    settings: &SolverSettings,
) -> Result<(BoundaryField, PicardReport)> {
    if !(settings.tol > 0.0) {
        return Err(Error::config("solver.tol must be positive"));
    }
    let z = z_field(&model.boundary, noise);
    let mut u = z.clone();
    let mut norms = Vec::new();
    let mut increments = Vec::new();
    for n in 1..=settings.max_iter {
        let next = boundary_map(model, g, &z, &u);
        let delta = sub_fields(&next, &u);
        let norm = settings.norm.eval(model, &delta);
        if !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: n,
                reason: "Picard iterate became non-finite".into(),
                history: norms,
            });
        }
        norms.push(norm);
        increments.push(delta);
        u = next;
        if norm < settings.tol {
            let field = BoundaryField {
                times: model.grid.nodes.clone(),
                nodes: model.boundary.points.clone(),
                values: u,
                noise_seed: noise.seed,
            };
            let report = PicardReport {
                iterates: n,
                increment_norms: norms,
                lambda: settings.norm.lambda,
                p: settings.norm.p,
                converged: true,
                increments,
            };
            return Ok((field, report));
        }
    }
    Err(Error::NonConvergence {
        iterations: settings.max_iter,
        reason: format!("weighted increment norm stayed above {}", settings.tol),
        history: norms,
    })
}

/// Weighted norm of `Z + V g(u) - u`.
pub fn fixed_point_residual(model: &Model, g: &Nonlinearity, noise: &NoisePath, field: &BoundaryField, norm: &WeightedNorm) -> f64 {
    let z = z_field(&model.boundary, noise);
    norm.eval(model, &sub_fields(&boundary_map(model, g, &z, &field.values), &field.values))
}

/// `u(t_i, x_p) = Z(t_i, x_p) + (V g(u|_{∂D}))(t_i, x_p)` for an interior set.
pub fn interior_solution(
    set: &PointSet,
    boundary: &BoundaryField,
    g: &Nonlinearity,
    noise: &NoisePath,
    i: usize,
    p: usize,
) -> f64 {
    let gu = map_field(&boundary.values, |v| g.value(v));
    z_at(set, p, &noise.increments(), i) + set.weights.apply(p, &gu, i)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionRow {
    pub lambda: f64,
    /// Norm of the linearized Picard step `h ↦ V(∂g(u) h)` in the `λ`-weighted norm.
    pub factor: f64,
    /// Ratios of successive re-weighted increment norms from iterate 2 on.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticTable {
    pub p: f64,
    pub mu: f64,
    pub rows: Vec<ContractionRow>,
    /// Log-log slope of the factor against `λ`.
    pub exponent: f64,
    /// `(μ - 1)/(p - 1)`.
    pub predicted_exponent: f64,
    pub satisfied: bool,
}

/// Matrix of `h ↦ V(∂g(u) h)` conjugated by the weights of the `λ`-norm.
fn weighted_step_matrix(model: &Model, g: &Nonlinearity, u: &[Vec<f64>], lambda: f64, p: f64) -> DMatrix<f64> {
    let set = &model.boundary;
    let nodes = set.len();
    let n = u.len();
    let dt = model.dt();
    let t = &model.grid.nodes;
    let w: Vec<f64> = (0..n * nodes)
        .map(|idx| (dt * (-lambda * t[idx / nodes]).exp() * model.domain.weights[idx % nodes]).powf(1.0 / p))
        .collect();
    let mut m = DMatrix::zeros(n * nodes, n * nodes);
    for i in 1..n {
        for j in 0..nodes {
            let row = i * nodes + j;
            for k in 0..=i {
                for l in 0..nodes {
                    let mut a = 0.0;
                    if k < i {
                        a += set.weights.b(i - 1 - k, j, l);
                    }
                    if k >= 1 {
                        a += set.weights.c(i - k, j, l);
                    }
                    let col = k * nodes + l;
                    m[(row, col)] = a * g.derivative(u[k][l], 1) * w[row] / w[col];
                }
            }
        }
    }
    m
}

/// Induced `ℓ^p` norm: exact for `p = 2`, Riesz–Thorin bound otherwise.
fn operator_norm(m: &DMatrix<f64>, p: f64) -> f64 {
    if (p - 2.0).abs() < 1e-12 {
        return m.clone().singular_values().max();
    }
    let col = m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let row = m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max);
    col.powf(1.0 / p) * row.powf(1.0 - 1.0 / p)
}

/// Contraction factors of the Picard map at the converged solution for each `λ`,
/// with the recorded increments re-weighted at the same `λ`.
pub fn contraction_diagnostics(
    model: &Model,
    g: &Nonlinearity,
    field: &BoundaryField,
    report: &PicardReport,
    p: f64,
    mu: f64,
    lambda_grid: &[f64],
) -> Result<DiagnosticTable> {
    if report.increments.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "contraction diagnostics need at least 3 increments, got {}",
            report.increments.len()
        )));
    }
    let rows: Vec<ContractionRow> = lambda_grid
        .iter()
        .map(|&lambda| {
            let norm = WeightedNorm { lambda, p };
            let norms: Vec<f64> = report.increments.iter().map(|d| norm.eval(model, d)).collect();
            let floor = 1e-13 * norms.iter().copied().fold(0.0, f64::max);
            let ratios: Vec<f64> = norms
                .windows(2)
                .skip(1)
                .take_while(|w| w[1] > floor)
                .map(|w| w[1] / w[0])
                .collect();
            let factor = operator_norm(&weighted_step_matrix(model, g, &field.values, lambda, p), p);
            ContractionRow { lambda, factor, ratios }
        })
        .collect();
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let factors: Vec<f64> = rows.iter().map(|r| r.factor).collect();
    let exponent = stats::loglog_slope(&lambdas, &factors)?;
    let decreasing = factors.windows(2).all(|w| w[1] < w[0]);
    let last_below_one = factors.last().is_some_and(|&f| f < 1.0);
    let ratios_below_one = rows.iter().flat_map(|r| &r.ratios).all(|&r| r < 1.0);
    Ok(DiagnosticTable {
        p,
        mu,
        rows,
        exponent,
        predicted_exponent: (mu - 1.0) / (p - 1.0),
        satisfied: decreasing && last_below_one && ratios_below_one && exponent <= 0.0,
    })
}
