//! The stochastic convolution `Z(t, x) = ∫_0^t ∫_S ∫_{∂D} p_N(t-s, x, ȳ) α(σ, ȳ) σ(dȳ) B(dσ, ds)`.

use crate::domain::{DomainSpec, Point, SMesh};
use crate::error::{Error, Result};
use crate::fbm::{kstar_norm_sq, substream, HGram, Hurst, NoisePath};
use crate::model::{par_replica_sum, Model, PointSet};
use crate::stats;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaKind {
    Constant(f64),
    /// `1 + ½ sin(2πσ)`
    Sinusoidal,
    /// `1` on `{x < 1/2}`, `0` elsewhere; violates the positivity hypothesis.
    Degenerate,
}

impl std::str::FromStr for AlphaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(AlphaKind::Constant(1.0)),
            "sinusoidal" => Ok(AlphaKind::Sinusoidal),
            "degenerate" => Ok(AlphaKind::Degenerate),
            other => Err(Error::config(format!(
                "alpha.kind must be constant, sinusoidal or degenerate, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Integrability {
    A1,
    /// `α ∈ L^θ(∂D; L²(S))`
    A1Prime { theta: f64 },
}

/// Noise coefficient `α(σ, ȳ)` on `S × ∂D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaCoefficient {
    pub kind: AlphaKind,
    pub integrability: Integrability,
}

impl AlphaCoefficient {
    pub fn constant(c: f64) -> Self {
        Self { kind: AlphaKind::Constant(c), integrability: Integrability::A1 }
    }

    pub fn sinusoidal() -> Self {
        Self { kind: AlphaKind::Sinusoidal, integrability: Integrability::A1 }
    }

    pub fn degenerate() -> Self {
        Self { kind: AlphaKind::Degenerate, integrability: Integrability::A1 }
    }

    pub fn with_theta(self, theta: f64) -> Self {
        Self { integrability: Integrability::A1Prime { theta }, ..self }
    }

    /// Enforces `θ > (d-1)/(2H-1)` when the coefficient claims (a1').
    pub fn validate(&self, h: Hurst<f64>, dim: usize) -> Result<()> {
        if let AlphaKind::Constant(c) = self.kind {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::config(format!("alpha.value must be finite and nonnegative, got {c}")));
            }
        }
        if let Integrability::A1Prime { theta } = self.integrability {
            let bound = if dim == 1 { 0.0 } else { (dim - 1) as f64 / (2.0 * h.value() - 1.0) };
            if !(theta > bound) {
                return Err(Error::config(format!(
                    "alpha.theta = {theta} must exceed (d-1)/(2H-1) = {bound}"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, sigma: f64, y: &Point<f64>) -> f64 {
        match self.kind {
            AlphaKind::Constant(c) => c,
            AlphaKind::Sinusoidal => 1.0 + 0.5 * (2.0 * PI * sigma).sin(),
            AlphaKind::Degenerate => {
                if y.x < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Analytic infimum `α₀`.
    pub fn lower_bound(&self) -> f64 {
        match self.kind {
            AlphaKind::Constant(c) => c,
            AlphaKind::Sinusoidal => 0.5,
            AlphaKind::Degenerate => 0.0,
        }
    }

    /// `[σ_j][l] ↦ α(σ_j, ȳ_l)` at cell midpoints and boundary nodes.
    pub fn matrix(&self, s_mesh: &SMesh<f64>, domain: &DomainSpec<f64>) -> Vec<Vec<f64>> {
        s_mesh
            .cells
            .iter()
            .map(|c| domain.nodes.iter().map(|n| self.eval(c.midpoint, &n.point)).collect())
            .collect()
    }

    /// Hypothesis (a2) checked at every mesh point.
    pub fn satisfies_a2(&self, s_mesh: &SMesh<f64>, domain: &DomainSpec<f64>) -> bool {
        let a0 = self.lower_bound();
        a0 > 0.0 && self.matrix(s_mesh, domain).iter().flatten().all(|&a| a >= a0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Increment,
    ExactGaussian,
}

impl std::str::FromStr for Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increment" => Ok(Route::Increment),
            "exact_gaussian" | "exact" => Ok(Route::ExactGaussian),
            other => Err(Error::config(format!("route must be increment or exact_gaussian, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionSample {
    pub t: f64,
    pub x: Point<f64>,
    pub value: f64,
    pub route: Route,
    pub seed: u64,
}

/// `(s, σ_j) ↦ ∫_{∂D} p_N(t-s, x, ȳ) α(σ_j, ȳ) σ(dȳ)`, zero for `s ≥ t`.
pub fn phi_integrand<'a>(model: &'a Model, t: f64, x: Point<f64>) -> impl Fn(f64, usize) -> Result<f64> + 'a {
    move |s, sigma| {
        if s >= t {
            return Ok(0.0);
        }
        model
            .domain
            .nodes
            .iter()
            .zip(&model.alpha[sigma])
            .map(|(node, a)| Ok(model.kernel.cell_integral(t - s, &x, node)? * a))
            .sum()
    }
}

/// `Z(t_i, x_p)` by the increment sum over cell-averaged integrands.
pub fn z_at(set: &PointSet, p: usize, increments: &[Vec<f64>], i: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..i {
        for (sigma, inc) in increments.iter().enumerate() {
            acc += set.phi.get(i - 1 - k, p, sigma) * inc[k];
        }
    }
    acc
}

/// `Z(t_i, x_p)` for every grid time and point, indexed `[i][p]`.
pub fn z_field(set: &PointSet, noise: &NoisePath) -> Vec<Vec<f64>> {
    let inc = noise.increments();
    let n = noise.grid.n_steps;
    (0..=n).map(|i| (0..set.len()).map(|p| z_at(set, p, &inc, i)).collect()).collect()
}

const EXACT_STREAM: u64 = 1 << 40;

pub fn simulate_z(
    model: &Model,
    set: &PointSet,
    p: usize,
    noise: &NoisePath,
    i: usize,
    route: Route,
    replica: u64,
) -> Result<ConvolutionSample> {
    let value = match route {
        Route::Increment => z_at(set, p, &noise.increments(), i),
        Route::ExactGaussian => {
            let v = variance_z(model, set, p, i)?;
            if i == 0 {
                0.0
            } else if !(v > 0.0) {
                return Err(Error::numerical(format!("non-positive variance {v} of Z at t = {}", model.grid.nodes[i])));
            } else {
                let mut rng = substream(noise.seed, replica, EXACT_STREAM + p as u64);
                let z: f64 = StandardNormal.sample(&mut rng);
                v.sqrt() * z
            }
        }
    };
    Ok(ConvolutionSample { t: model.grid.nodes[i], x: set.points[p], value, route, seed: noise.seed })
}

/// `E|Z(t_i, x_p)|²` as the `H`-norm of the cell-averaged integrand.
pub fn variance_z(model: &Model, set: &PointSet, p: usize, i: usize) -> Result<f64> {
    if i == 0 {
        return Ok(0.0);
    }
    let gram = HGram::new(&model.grid.nodes[..=i], model.hurst, None)?;
    let cells = set.phi.cells(p, i, i);
    Ok(model.s_mesh.cells.iter().zip(&cells).map(|(c, v)| c.measure * gram.bilinear(v, v)).sum())
}

/// `Σ_j μ_j ∫_0^t |K* φ(·, σ_j)|² ds` with the continuous-time integrand.
pub fn variance_z_kstar(model: &Model, t: f64, x: Point<f64>) -> Result<f64> {
    let h = model.hurst.require_fractional()?;
    let phi = phi_integrand(model, t, x);
    let mut total = 0.0;
    for c in &model.s_mesh.cells {
        let f = |s: f64| phi(s, c.index).unwrap_or(f64::NAN);
        let v = kstar_norm_sq(&f, t, h)?;
        if !v.is_finite() {
            return Err(Error::numerical("kernel evaluation failed inside the K* quadrature"));
        }
        total += c.measure * v;
    }
    Ok(total)
}

/// Outcome of an empirical check, serialized as a JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub params: BTreeMap<String, f64>,
    pub slope: Option<f64>,
    pub values: Vec<f64>,
    pub satisfied: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Regression of `log E|Z(t,x) - Z(t,z)|²` on `log |x - z|` along the first axis.
pub fn holder_probe(
    model: &Model,
    t: f64,
    center: Point<f64>,
    separations: &[f64],
    min_distance: f64,
    replicas: usize,
    seed: u64,
) -> Result<ProbeReport> {
    let i = model.time_index(t)?;
    let mut points = vec![center];
    points.extend(separations.iter().map(|h| Point::new(center.x + h, center.y)));
    if let Some(p) = points.iter().find(|p| model.domain.boundary_distance(p) < min_distance) {
        return Err(Error::config(format!(
            "probe point ({}, {}) is closer than {min_distance} to the boundary",
            p.x, p.y
        )));
    }
    let set = model.interior(&points)?;
    let sums = par_replica_sum(replicas, separations.len(), |r| {
        let inc = model.sample_noise(seed, r as u64).increments();
        let z0 = z_at(&set, 0, &inc, i);
        (1..points.len()).map(|p| (z_at(&set, p, &inc, i) - z0).powi(2)).collect()
    });
    let values: Vec<f64> = sums.iter().map(|s| s / replicas as f64).collect();
    let slope = stats::loglog_slope(separations, &values)?;
    let params = BTreeMap::from([
        ("t".into(), t),
        ("min_distance".into(), min_distance),
        ("replicas".into(), replicas as f64),
        ("hurst".into(), model.hurst.value()),
    ]);
    Ok(ProbeReport {
        probe: "holder".into(),
        params,
        slope: Some(slope),
        values,
        satisfied: (1.8..=2.2).contains(&slope),
        flags: Vec::new(),
    })
}

/// Moments `E|Z(t_i, ξ_j)|^p` at every boundary node and grid time; each row
/// of nodes must stay within three times its median.
pub fn trace_probe(model: &Model, powers: &[i32], replicas: usize, seed: u64) -> Result<ProbeReport> {
    if matches!(model.spec.alpha.integrability, Integrability::A1) && model.domain.dim() > 1 {
        return Err(Error::config("the boundary trace probe needs alpha.theta (hypothesis a1')"));
    }
    let n = model.n_steps();
    let nodes = model.boundary.len();
    let width = powers.len() * n * nodes;
    let sums = par_replica_sum(replicas, width, |r| {
        let z = z_field(&model.boundary, &model.sample_noise(seed, r as u64));
        let mut out = Vec::with_capacity(width);
        for &p in powers {
            for row in &z[1..] {
                out.extend(row.iter().map(|v| v.abs().powi(p)));
            }
        }
        out
    });
    let moments: Vec<f64> = sums.iter().map(|s| s / replicas as f64).collect();
    let mut worst_ratio: f64 = 0.0;
    let mut maxima = Vec::with_capacity(powers.len());
    for block in moments.chunks(n * nodes) {
        let mut max_p: f64 = 0.0;
        for row in block.chunks(nodes) {
            let med = stats::median(row);
            let top = row.iter().copied().fold(0.0, f64::max);
            max_p = max_p.max(top);
            if med > 0.0 {
                worst_ratio = worst_ratio.max(top / med);
            }
        }
        maxima.push(max_p);
    }
    let params = BTreeMap::from([
        ("replicas".into(), replicas as f64),
        ("worst_max_over_median".into(), worst_ratio),
        ("hurst".into(), model.hurst.value()),
    ]);
    let satisfied = maxima.iter().all(|m| m.is_finite()) && worst_ratio <= 3.0;
    Ok(ProbeReport { probe: "trace".into(), params, slope: None, values: maxima, satisfied, flags: Vec::new() })
}

/// Moments of order 2, 4 and 8 at one point and the kurtosis `E Z⁴ / (E Z²)²`.
pub fn moment_probe(model: &Model, t: f64, x: Point<f64>, replicas: usize, seed: u64) -> Result<ProbeReport> {
    let i = model.time_index(t)?;
    let (set, p) = point_set_for(model, x)?;
    let sums = par_replica_sum(replicas, 3, |r| {
        let z = z_at(&set, p, &model.sample_noise(seed, r as u64).increments(), i);
        vec![z.powi(2), z.powi(4), z.powi(8)]
    });
    let m: Vec<f64> = sums.iter().map(|s| s / replicas as f64).collect();
    let kurtosis = m[1] / (m[0] * m[0]);
    let params = BTreeMap::from([("t".into(), t), ("replicas".into(), replicas as f64)]);
    Ok(ProbeReport {
        probe: "moments".into(),
        params,
        slope: None,
        values: vec![m[0], m[1], m[2], kurtosis],
        satisfied: m.iter().all(|v| v.is_finite()) && (kurtosis - 3.0).abs() < 0.3,
        flags: Vec::new(),
    })
}

/// The point set holding `x`: the boundary set when `x` is a boundary node,
/// otherwise a fresh interior set.
pub fn point_set_for(model: &Model, x: Point<f64>) -> Result<(PointSet, usize)> {
    match model.boundary.points.iter().position(|q| q.dist(&x) < 1e-12) {
        Some(p) => Ok((model.boundary.clone(), p)),
        None => Ok((model.interior(&[x])?, 0)),
    }
}
