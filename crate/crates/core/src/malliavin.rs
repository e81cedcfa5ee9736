//! Malliavin derivatives of `Z` and `u` on the grid, their `H`-norms and the
//! probes for the density estimates.

use crate::domain::Point;
use crate::error::{Error, Result};
use crate::fbm::{HGram, NoisePath};
use crate::model::{par_replica_sum, Model, PointSet};
use crate::nonlinear_solver::{picard_boundary, BoundaryField, Nonlinearity, Smoothness, SolverSettings};
use crate::stats;
use crate::stoch_conv::{point_set_for, ProbeReport};
use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Z,
    U,
    UInterior(Point<f64>),
}

/// `D_{r,σ} F(t_i, ξ_l)` with `r` running over the grid cells, indexed
/// `[k][σ][i][l]`; zero whenever cell `k` starts at or after `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalliavinField {
    pub target: Target,
    pub order: u8,
    pub n_cells: usize,
    pub n_s: usize,
    pub n_times: usize,
    pub n_points: usize,
    values: Vec<f64>,
}

impl MalliavinField {
    fn zeros(target: Target, n_cells: usize, n_s: usize, n_points: usize) -> Self {
        let n_times = n_cells + 1;
        Self { target, order: 1, n_cells, n_s, n_times, n_points, values: vec![0.0; n_cells * n_s * n_times * n_points] }
    }

    #[inline]
    fn idx(&self, k: usize, sigma: usize, i: usize, l: usize) -> usize {
        ((k * self.n_s + sigma) * self.n_times + i) * self.n_points + l
    }

    #[inline]
    pub fn get(&self, k: usize, sigma: usize, i: usize, l: usize) -> f64 {
        self.values[self.idx(k, sigma, i, l)]
    }

    fn set_column(&mut self, k: usize, sigma: usize, column: &[Vec<f64>]) {
        for (i, row) in column.iter().enumerate() {
            for (l, v) in row.iter().enumerate() {
                let idx = self.idx(k, sigma, i, l);
                self.values[idx] = *v;
            }
        }
    }

    /// `(r, σ) ↦ D_{r,σ} F(t_i, ξ_l)` as cell values `[σ][k]`.
    pub fn cells_at(&self, i: usize, l: usize) -> Vec<Vec<f64>> {
        (0..self.n_s).map(|s| (0..self.n_cells).map(|k| self.get(k, s, i, l)).collect()).collect()
    }

    /// Rows `(k, σ, i, l, value)` for export.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        (0..self.n_cells).flat_map(move |k| {
            (0..self.n_s).flat_map(move |s| {
                (0..self.n_times).flat_map(move |i| (0..self.n_points).map(move |l| (k, s, i, l, self.get(k, s, i, l))))
            })
        })
    }

    pub fn is_causal(&self) -> bool {
        self.entries().all(|(k, _, i, _, v)| k < i || v == 0.0)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `D_{r,σ} Z(t, x) = ∫_{∂D} p_N(t-r, x, ȳ) α(σ, ȳ) σ(dȳ)` averaged over grid cells.
pub fn dz_field(model: &Model, set: &PointSet, target: Target) -> MalliavinField {
    let n = model.n_steps();
    let mut f = MalliavinField::zeros(target, n, model.s_mesh.len(), set.len());
    for k in 0..n {
        for sigma in 0..f.n_s {
            for i in k + 1..=n {
                for l in 0..set.len() {
                    let idx = f.idx(k, sigma, i, l);
                    f.values[idx] = set.phi.get(i - 1 - k, l, sigma);
                }
            }
        }
    }
    f
}

/// Linearization of the boundary equation around a solution:
/// `d_i = f_i + Σ_{k<i} B ∂g(u_k) d_k + C ∂g(u_{k+1}) d_{k+1}`.
struct LinearizedStep<'a> {
    set: &'a PointSet,
    gprime: Vec<Vec<f64>>,
    lu: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl<'a> LinearizedStep<'a> {
    fn new(model: &'a Model, g: &Nonlinearity, u: &BoundaryField) -> Self {
        let set = &model.boundary;
        let nodes = set.len();
        let gprime: Vec<Vec<f64>> = u.values.iter().map(|row| row.iter().map(|&v| g.derivative(v, 1)).collect()).collect();
        let lu = gprime
            .iter()
            .map(|gp| {
                let m = DMatrix::from_fn(nodes, nodes, |j, l| {
                    let id = if j == l { 1.0 } else { 0.0 };
                    id - set.weights.c(0, j, l) * gp[l]
                });
                m.lu()
            })
            .collect();
        Self { set, gprime, lu }
    }

    /// Solves the linear equation with forcing `f[i][j]`, which must vanish for `i ≤ start`.
    fn march(&self, forcing: &[Vec<f64>], start: usize) -> Result<Vec<Vec<f64>>> {
        let n = forcing.len();
        let nodes = self.set.len();
        let mut d = vec![vec![0.0; nodes]; n];
        let mut h = vec![vec![0.0; nodes]; n];
        for i in start + 1..n {
            let rhs = DVector::from_fn(nodes, |j, _| {
                let mut acc = forcing[i][j];
                for k in start..i {
                    let m = i - 1 - k;
                    for l in 0..nodes {
                        acc += self.set.weights.b(m, j, l) * h[k][l];
                        if k + 1 < i {
                            acc += self.set.weights.c(m, j, l) * h[k + 1][l];
                        }
                    }
                }
                acc
            });
            let sol = self.lu[i]
                .solve(&rhs)
                .ok_or_else(|| Error::numerical(format!("singular linearized step at grid time {i}")))?;
            for j in 0..nodes {
                d[i][j] = sol[j];
                h[i][j] = self.gprime[i][j] * sol[j];
            }
        }
        Ok(d)
    }

    fn forcing_phi(&self, n_times: usize, k: usize, sigma: usize) -> Vec<Vec<f64>> {
        (0..n_times)
            .map(|i| (0..self.set.len()).map(|j| if i > k { self.set.phi.get(i - 1 - k, j, sigma) } else { 0.0 }).collect())
            .collect()
    }
}

/// First derivative of `u` for the cells `r ∈ cells` (all cells when `None`).
pub fn du_solve(
    model: &Model,
    u: &BoundaryField,
    g: &Nonlinearity,
    target: Target,
    cells: Option<Range<usize>>,
) -> Result<MalliavinField> {
    let n = model.n_steps();
    let n_s = model.s_mesh.len();
    let cells = cells.unwrap_or(0..n);
    let interior = match target {
        Target::Z => return Ok(dz_field(model, &model.boundary, Target::Z)),
        Target::U => None,
        Target::UInterior(x) => Some(model.interior(&[x])?),
    };
    let step = LinearizedStep::new(model, g, u);
    let jobs: Vec<(usize, usize)> = cells.flat_map(|k| (0..n_s).map(move |s| (k, s))).collect();
    let columns: Vec<Vec<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(k, sigma)| {
            let d = step.march(&step.forcing_phi(n + 1, k, sigma), k)?;
            Ok(match &interior {
                None => d,
                Some(set) => {
                    let h: Vec<Vec<f64>> =
                        d.iter().zip(&step.gprime).map(|(r, gp)| r.iter().zip(gp).map(|(a, b)| a * b).collect()).collect();
                    (0..=n)
                        .map(|i| {
                            let z = if i > k { set.phi.get(i - 1 - k, 0, sigma) } else { 0.0 };
                            vec![z + set.weights.apply(0, &h, i)]
                        })
                        .collect()
                }
            })
        })
        .collect::<Result<_>>()?;
    let points = interior.as_ref().map_or(model.boundary.len(), |s| s.len());
    let mut field = MalliavinField::zeros(target, n, n_s, points);
    for (&(k, sigma), col) in jobs.iter().zip(&columns) {
        field.set_column(k, sigma, col);
    }
    Ok(field)
}

/// `D_{r₁,σ₁} D_{r₂,σ₂} u(t_i, ξ_j)` indexed `[i][j]`.
pub fn d2u_solve(
    model: &Model,
    u: &BoundaryField,
    g: &Nonlinearity,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<Vec<Vec<f64>>> {
    if g.smoothness != Smoothness::G2 {
        return Err(Error::Unsupported("second derivatives need a nonlinearity with bounded higher derivatives".into()));
    }
    let n = model.n_steps();
    let step = LinearizedStep::new(model, g, u);
    let d1 = step.march(&step.forcing_phi(n + 1, first.0, first.1), first.0)?;
    let d2 = step.march(&step.forcing_phi(n + 1, second.0, second.1), second.0)?;
    let h: Vec<Vec<f64>> = (0..=n)
        .map(|i| (0..model.boundary.len()).map(|j| g.derivative(u.values[i][j], 2) * d1[i][j] * d2[i][j]).collect())
        .collect();
    let forcing: Vec<Vec<f64>> =
        (0..=n).map(|i| (0..model.boundary.len()).map(|j| model.boundary.weights.apply(j, &h, i)).collect()).collect();
    step.march(&forcing, first.0.max(second.0))
}

/// `((r₁, σ₁), (r₂, σ₂))` as grid-cell and `S`-cell indices.
pub type CellPair = ((usize, usize), (usize, usize));

/// Second derivative evaluated on a list of cell pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderField {
    pub pairs: Vec<CellPair>,
    /// `values[pair][i][j]`
    pub values: Vec<Vec<Vec<f64>>>,
}

pub fn d2u_field(
    model: &Model,
    u: &BoundaryField,
    g: &Nonlinearity,
    pairs: &[CellPair],
) -> Result<SecondOrderField> {
    let values = pairs.par_iter().map(|&(a, b)| d2u_solve(model, u, g, a, b)).collect::<Result<_>>()?;
    Ok(SecondOrderField { pairs: pairs.to_vec(), values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Full,
    /// `(t - δ, t)`
    Trailing(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HNormResult {
    pub value: f64,
    pub window: Window,
    pub quadrature_error_estimate: f64,
}

/// `Σ_j μ_j ∬ φ(s, σ_j) φ(r, σ_j) |s - r|^{2H-2} α_H ds dr` over `window²`
/// for cell values `[σ][k]` on the grid up to `t_i`.
pub fn h_norm(model: &Model, cells: &[Vec<f64>], i: usize, window: Window) -> Result<HNormResult> {
    let t = model.grid.nodes[i];
    let win = match window {
        Window::Full => None,
        Window::Trailing(delta) => {
            if !(delta > 0.0) {
                return Err(Error::domain(format!("empty window of width {delta}")));
            }
            Some(((t - delta).max(0.0), t))
        }
    };
    if i == 0 {
        return Ok(HNormResult { value: 0.0, window, quadrature_error_estimate: 0.0 });
    }
    let gram = HGram::new(&model.grid.nodes[..=i], model.hurst, win)?;
    let mut value = 0.0;
    let mut magnitude = 0.0;
    for (c, v) in model.s_mesh.cells.iter().zip(cells) {
        let v = &v[..i];
        value += c.measure * gram.bilinear(v, v);
        let a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
        magnitude += c.measure * gram.bilinear(&a, &a).abs();
    }
    let err = f64::EPSILON * (i * i) as f64 * magnitude;
    Ok(HNormResult { value, window, quadrature_error_estimate: err })
}

fn probe_params(model: &Model, t: f64, extra: &[(&str, f64)]) -> BTreeMap<String, f64> {
    let mut p = BTreeMap::from([("t".to_string(), t), ("hurst".to_string(), model.hurst.value()), ("beta".to_string(), model.spec.beta)]);
    p.extend(extra.iter().map(|(k, v)| (k.to_string(), *v)));
    p
}

/// `‖D Z(t, x)‖²_{H_δ}` over `deltas` and its log-log slope in `δ`.
pub fn lower_bound_probe(model: &Model, t: f64, x: Point<f64>, deltas: &[f64]) -> Result<ProbeReport> {
    let i = model.time_index(t)?;
    if let Some(d) = deltas.iter().find(|&&d| !(d > 0.0 && d < t / 2.0)) {
        return Err(Error::config(format!("probe delta {d} must lie in (0, t/2)")));
    }
    let (set, p) = point_set_for(model, x)?;
    let cells = set.phi.cells(p, i, model.n_steps());
    let values: Vec<f64> =
        deltas.iter().map(|&d| Ok(h_norm(model, &cells, i, Window::Trailing(d))?.value)).collect::<Result<_>>()?;
    let all_positive = values.iter().all(|&v| v > 0.0);
    let slope = if all_positive { Some(stats::loglog_slope(deltas, &values)?) } else { None };
    let target = 2.0 * model.hurst.value() - 1.0;
    let mut flags = Vec::new();
    if !model.spec.alpha.satisfies_a2(&model.s_mesh, &model.domain) {
        flags.push("unsupported_hypothesis".to_string());
    }
    Ok(ProbeReport {
        probe: "lower_bound".into(),
        params: probe_params(model, t, &[("x", x.x), ("y", x.y), ("predicted_slope", target)]),
        slope,
        values,
        satisfied: all_positive && slope.is_some_and(|s| s <= target + 0.1),
        flags,
    })
}

/// First cell meeting `(t_i - δ, t_i)`.
fn first_cell(model: &Model, i: usize, delta: f64) -> usize {
    let lo = model.grid.nodes[i] - delta;
    ((lo / model.dt()).floor().max(0.0) as usize).min(i)
}

/// `E ‖D G(t, ξ_l)‖^p_{H_δ}` with `G = u - Z`, one report per power `p`.
#[allow(clippy::too_many_arguments)]
pub fn dg_bound_probe(
    model: &Model,
    g: &Nonlinearity,
    settings: &SolverSettings,
    t: f64,
    node: usize,
    deltas: &[f64],
    powers: &[f64],
    mu: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<ProbeReport>> {
    let i = model.time_index(t)?;
    let dmax = deltas.iter().copied().fold(0.0, f64::max);
    let k0 = first_cell(model, i, dmax);
    let dz = model.boundary.phi.cells(node, i, model.n_steps());
    let first_error = std::sync::Mutex::new(None);
    let width = deltas.len() * powers.len();
    let sums = par_replica_sum(replicas, width, |r| {
        let run = || -> Result<Vec<f64>> {
            let noise = model.sample_noise(seed, r as u64);
            let (u, _) = picard_boundary(model, g, &noise, settings)?;
            let du = du_solve(model, &u, g, Target::U, Some(k0..i))?;
            let dg: Vec<Vec<f64>> = du
                .cells_at(i, node)
                .iter()
                .zip(&dz)
                .map(|(a, b)| a.iter().zip(b).enumerate().map(|(k, (x, y))| if k >= k0 { x - y } else { 0.0 }).collect())
                .collect();
            let mut out = Vec::with_capacity(width);
            for &p in powers {
                for &d in deltas {
                    let v = h_norm(model, &dg, i, Window::Trailing(d))?.value.max(0.0);
                    out.push(v.powf(p / 2.0));
                }
            }
            Ok(out)
        };
        run().unwrap_or_else(|e| {
            first_error.lock().expect("error slot").get_or_insert(e);
            vec![0.0; width]
        })
    });
    if let Some(e) = first_error.into_inner().expect("error slot") {
        return Err(e);
    }
    let mut flags = Vec::new();
    if replicas < 100 {
        flags.push("insufficient_replicas".to_string());
    }
    powers
        .iter()
        .enumerate()
        .map(|(pi, &p)| {
            let values: Vec<f64> = sums[pi * deltas.len()..(pi + 1) * deltas.len()].iter().map(|s| s / replicas as f64).collect();
            let bound = p * (1.0 - mu) - 0.2;
            let (slope, satisfied) = if values.iter().all(|&v| v == 0.0) {
                (None, true)
            } else {
                let s = stats::loglog_slope(deltas, &values)?;
                (Some(s), s >= bound)
            };
            Ok(ProbeReport {
                probe: "dg_bound".into(),
                params: probe_params(model, t, &[("p", p), ("mu", mu), ("replicas", replicas as f64), ("required_exponent", bound)]),
                slope,
                values,
                satisfied,
                flags: flags.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub epsilons: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub dz_norm: f64,
    pub median_norm: f64,
    pub replicas: usize,
    pub satisfied: bool,
    #[serde(skip)]
    pub norms: Vec<f64>,
}

/// `‖D u(t_i, ξ_l)‖²_H` for one noise realization.
pub fn du_norm_sq(model: &Model, g: &Nonlinearity, settings: &SolverSettings, noise: &NoisePath, i: usize, node: usize) -> Result<f64> {
    let (u, _) = picard_boundary(model, g, noise, settings)?;
    let du = du_solve(model, &u, g, Target::U, Some(0..i))?;
    Ok(h_norm(model, &du.cells_at(i, node), i, Window::Full)?.value)
}

/// Empirical `P(‖D u(t, ξ)‖²_H < ε)`; the default grid is
/// `{2·median, median, ‖DZ‖²_H, ¼‖DZ‖²_H}`.
#[allow(clippy::too_many_arguments)]
pub fn nondegeneracy_prob(
    model: &Model,
    g: &Nonlinearity,
    settings: &SolverSettings,
    t: f64,
    node: usize,
    epsilons: Option<&[f64]>,
    replicas: usize,
    seed: u64,
) -> Result<DecayReport> {
    let i = model.time_index(t)?;
    let dz_norm = h_norm(model, &model.boundary.phi.cells(node, i, model.n_steps()), i, Window::Full)?.value;
    let norms: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|r| du_norm_sq(model, g, settings, &model.sample_noise(seed, r as u64), i, node))
        .collect::<Result<_>>()?;
    let median_norm = stats::median(&norms);
    let epsilons = match epsilons {
        Some(e) => e.to_vec(),
        None => vec![2.0 * median_norm, median_norm, dz_norm, 0.25 * dz_norm],
    };
    let probabilities: Vec<f64> =
        epsilons.iter().map(|&e| norms.iter().filter(|&&v| v < e).count() as f64 / replicas as f64).collect();
    let mut order: Vec<usize> = (0..epsilons.len()).collect();
    order.sort_by(|&a, &b| epsilons[b].total_cmp(&epsilons[a]));
    let monotone = order.windows(2).all(|w| probabilities[w[1]] <= probabilities[w[0]]);
    let smallest_zero = order.last().is_some_and(|&k| probabilities[k] == 0.0);
    Ok(DecayReport { epsilons, probabilities, dz_norm, median_norm, replicas, satisfied: monotone && smallest_zero, norms })
}

/// Central difference of `u(t_i, ξ_l)` in the increment `ΔB_k^σ` against the
/// computed derivative; returns `(finite_difference, derivative)`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_check(
    model: &Model,
    g: &Nonlinearity,
    settings: &SolverSettings,
    noise: &NoisePath,
    cell: (usize, usize),
    i: usize,
    node: usize,
    eps: f64,
) -> Result<(f64, f64)> {
    let (k, sigma) = cell;
    let solve = |shift: f64| -> Result<f64> {
        let mut inc = noise.increments();
        inc[sigma][k] += shift;
        let (u, _) = picard_boundary(model, g, &noise.with_increments(&inc), settings)?;
        Ok(u.values[i][node])
    };
    let fd = (solve(eps)? - solve(-eps)?) / (2.0 * eps);
    let (u, _) = picard_boundary(model, g, noise, settings)?;
    let du = du_solve(model, &u, g, Target::U, Some(k..k + 1))?;
    Ok((fd, du.get(k, sigma, i, node)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::nonlinear_solver::NonlinearityKind;
    use crate::quadrature::pair_cell_weight;
    use crate::stoch_conv::variance_z;

    fn model(n: usize) -> Model {
        let mut spec = ModelSpec::interval();
        spec.n_steps = n;
        Model::new(spec).unwrap()
    }

    fn solved(m: &Model, g: &Nonlinearity, seed: u64) -> BoundaryField {
        let s = SolverSettings { tol: 1e-13, ..SolverSettings::default_for(1.0) };
        picard_boundary(m, g, &m.sample_noise(seed, 0), &s).unwrap().0
    }

    #[test]
    fn dz_is_causal_and_sigma_free_for_unit_alpha() {
        let m = model(12);
        let f = dz_field(&m, &m.boundary, Target::Z);
        assert!(f.is_causal());
        for (k, _, i, l, v) in f.entries() {
            assert_eq!(v, f.get(k, 1, i, l));
        }
    }

    #[test]
    fn linear_case_reduces_to_dz() {
        let m = model(30);
        let u = solved(&m, &Nonlinearity::zero(), 1);
        let du = du_solve(&m, &u, &Nonlinearity::zero(), Target::U, None).unwrap();
        assert_eq!(du.max_abs_diff(&dz_field(&m, &m.boundary, Target::Z)), 0.0);
        let n = h_norm(&m, &du.cells_at(30, 0), 30, Window::Full).unwrap().value;
        assert!((n - variance_z(&m, &m.boundary, 0, 30).unwrap()).abs() < 1e-12);
        assert!(d2u_solve(&m, &u, &Nonlinearity::zero(), (3, 0), (5, 1)).unwrap().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn second_derivative_of_linear_g_vanishes() {
        let m = model(20);
        let g = Nonlinearity::new(NonlinearityKind::Linear(0.8)).unwrap();
        let u = solved(&m, &g, 4);
        assert!(d2u_solve(&m, &u, &g, (2, 0), (7, 1)).unwrap().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn second_derivative_is_symmetric() {
        let m = model(24);
        let g = Nonlinearity::tanh();
        let u = solved(&m, &g, 8);
        let a = d2u_solve(&m, &u, &g, (3, 0), (9, 1)).unwrap();
        let b = d2u_solve(&m, &u, &g, (9, 1), (3, 0)).unwrap();
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!(a.iter().flatten().any(|&v| v != 0.0));
        assert!(matches!(d2u_solve(&m, &u, &g.lipschitz_only(), (3, 0), (9, 1)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn derivative_matches_perturbation() {
        let m = model(30);
        let g = Nonlinearity::tanh();
        let s = SolverSettings { tol: 1e-13, ..SolverSettings::default_for(1.0) };
        let noise = m.sample_noise(21, 0);
        let (fd, d) = perturbation_check(&m, &g, &s, &noise, (10, 1), 25, 0, 1e-4).unwrap();
        assert!((fd - d).abs() / d.abs() < 1e-5, "{fd} {d}");
    }

    #[test]
    fn interior_derivative_of_linear_case_is_dz() {
        let m = model(16);
        let x = Point::on_line(0.3);
        let u = solved(&m, &Nonlinearity::zero(), 1);
        let du = du_solve(&m, &u, &Nonlinearity::zero(), Target::UInterior(x), None).unwrap();
        let set = m.interior(&[x]).unwrap();
        assert_eq!(du.max_abs_diff(&dz_field(&m, &set, Target::UInterior(x))), 0.0);
    }

    #[test]
    fn h_norm_matches_brute_force_cells() {
        let mut spec = ModelSpec::interval();
        spec.n_steps = 4;
        spec.hurst = 0.7;
        let m = Model::new(spec).unwrap();
        let cells = vec![vec![0.3, -1.2, 0.8, 2.0], vec![1.0, 0.5, -0.4, 0.1]];
        let h = 0.7;
        let alpha = h * (2.0 * h - 1.0);
        let e = &m.grid.nodes;
        let mut brute = 0.0;
        for (c, v) in m.s_mesh.cells.iter().zip(&cells) {
            for a in 0..4 {
                for b in 0..4 {
                    brute += c.measure * v[a] * v[b] * alpha * pair_cell_weight(e[a], e[a + 1], e[b], e[b + 1], 2.0 * h);
                }
            }
        }
        let got = h_norm(&m, &cells, 4, Window::Full).unwrap().value;
        assert!((got - brute).abs() < 1e-10);
        let w = h_norm(&m, &cells, 4, Window::Trailing(0.3)).unwrap();
        assert!(w.value <= got);
        assert!(matches!(h_norm(&m, &cells, 4, Window::Trailing(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn windowed_norms_grow_with_delta() {
        let m = model(40);
        let cells = m.boundary.phi.cells(0, 40, 40);
        let v: Vec<f64> = [0.05, 0.1, 0.2, 0.4].iter().map(|&d| h_norm(&m, &cells, 40, Window::Trailing(d)).unwrap().value).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn degenerate_alpha_is_flagged() {
        let mut spec = ModelSpec::interval();
        spec.n_steps = 20;
        spec.alpha = crate::stoch_conv::AlphaCoefficient::degenerate();
        let m = Model::new(spec).unwrap();
        let r = lower_bound_probe(&m, 1.0, Point::on_line(0.0), &[0.1, 0.2]).unwrap();
        assert!(r.flags.contains(&"unsupported_hypothesis".to_string()));
    }

    #[test]
    fn zero_g_has_no_dg_and_no_degeneracy() {
        let m = model(20);
        let s = SolverSettings::default_for(1.0);
        let r = dg_bound_probe(&m, &Nonlinearity::zero(), &s, 1.0, 0, &[0.1, 0.2], &[2.0], 0.75, 8, 1).unwrap();
        assert!(r[0].values.iter().all(|&v| v == 0.0) && r[0].satisfied);
        let d = nondegeneracy_prob(&m, &Nonlinearity::zero(), &s, 1.0, 0, None, 16, 1).unwrap();
        assert_eq!(d.probabilities[3], 0.0);
        assert_eq!(d.probabilities[2], 0.0);
    }
}
