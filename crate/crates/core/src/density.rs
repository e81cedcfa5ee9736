//! Monte Carlo ensembles of `u(t, x)` and kernel density estimates of its law.

use crate::domain::Point;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::nonlinear_solver::{interior_solution, picard_boundary, Nonlinearity, SolverSettings};
use crate::special::{normal_cdf, normal_pdf};
use crate::stats;
use crate::stoch_conv::point_set_for;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub samples: Vec<f64>,
    /// Seeds of replicas whose Picard iteration failed.
    pub excluded: Vec<u64>,
    pub base_seed: u64,
}

/// `n_samples` realizations of `u(t, x)`, replica `i` driven by seed `base_seed + i`.
#[allow(clippy::too_many_arguments)]
pub fn mc_ensemble(
    model: &Model,
    g: &Nonlinearity,
    settings: &SolverSettings,
    t: f64,
    x: Point<f64>,
    n_samples: usize,
    base_seed: u64,
) -> Result<Ensemble> {
    if n_samples < 100 {
        return Err(Error::InsufficientData(format!("an ensemble needs at least 100 samples, got {n_samples}")));
    }
    let i = model.time_index(t)?;
    let (set, p) = point_set_for(model, x)?;
    let on_boundary = model.domain.boundary_distance(&x) <= 0.0;
    let draws: Vec<(u64, Result<f64>)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r);
            let noise = model.sample_noise(seed, 0);
            let value = picard_boundary(model, g, &noise, settings).map(|(u, _)| {
                if on_boundary {
                    u.values[i][p]
                } else {
                    interior_solution(&set, &u, g, &noise, i, p)
                }
            });
            (seed, value)
        })
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    let mut excluded = Vec::new();
    for (seed, v) in draws {
        match v {
            Ok(v) => samples.push(v),
            Err(Error::NonConvergence { .. }) => excluded.push(seed),
            Err(e) => return Err(e),
        }
    }
    if excluded.len() * 100 > n_samples {
        return Err(Error::numerical(format!(
            "{} of {n_samples} replicas failed to converge",
            excluded.len()
        )));
    }
    Ok(Ensemble { samples, excluded, base_seed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub eval_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

pub const GRID_POINTS: usize = 201;

impl DensityEstimate {
    /// Trapezoidal integral over the evaluation grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.eval_grid, &self.values)
    }

    /// Largest estimated probability mass within one bandwidth.
    pub fn peak_mass(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max) * self.bandwidth
    }

    pub fn sup_error<F: Fn(f64) -> f64>(&self, pdf: F) -> f64 {
        self.eval_grid.iter().zip(&self.values).map(|(&v, &f)| (f - pdf(v)).abs()).fold(0.0, f64::max)
    }

    /// `max |f̂(v) - f̂(-v)|` over grid points whose reflection lies in the grid.
    pub fn asymmetry(&self, samples: &[f64]) -> f64 {
        let lo = self.eval_grid[0];
        let hi = self.eval_grid[self.eval_grid.len() - 1];
        self.eval_grid
            .iter()
            .zip(&self.values)
            .filter(|(&v, _)| -v >= lo && -v <= hi)
            .map(|(&v, &f)| (f - kde_at(samples, self.bandwidth, -v)).abs())
            .fold(0.0, f64::max)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

fn kde_at(samples: &[f64], h: f64, v: f64) -> f64 {
    samples.iter().map(|s| normal_pdf((v - s) / h)).sum::<f64>() / (samples.len() as f64 * h)
}

/// Gaussian-kernel estimate on 201 points spanning mean ± 5 standard
/// deviations; the default bandwidth is `1.06 σ̂ n^{-1/5}`.
pub fn kde(samples: &[f64], bandwidth: Option<f64>) -> Result<DensityEstimate> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!("density estimation needs at least 100 samples, got {n}")));
    }
    let sd = stats::variance(samples).sqrt();
    if !(sd > 0.0) {
        return Err(Error::domain("degenerate distribution: zero sample variance"));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::config(format!("bandwidth must be positive, got {h}"))),
        None => 1.06 * sd * (n as f64).powf(-0.2),
    };
    let m = stats::mean(samples);
    let step = 10.0 * sd / (GRID_POINTS - 1) as f64;
    let eval_grid: Vec<f64> = (0..GRID_POINTS).map(|k| m - 5.0 * sd + step * k as f64).collect();
    let values = eval_grid.par_iter().map(|&v| kde_at(samples, h, v)).collect();
    Ok(DensityEstimate { eval_grid, values, bandwidth: h, n_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityComparison {
    pub l1_error: f64,
    pub ks_stat: f64,
    pub ks_p_value: f64,
}

/// Distance of an estimate and its samples from the centered Gaussian law with `variance`.
pub fn density_compare(estimate: &DensityEstimate, samples: &[f64], variance: f64) -> Result<DensityComparison> {
    if !(variance > 0.0) {
        return Err(Error::domain(format!("oracle variance must be positive, got {variance}")));
    }
    let sd = variance.sqrt();
    let diff: Vec<f64> =
        estimate.eval_grid.iter().zip(&estimate.values).map(|(&v, &f)| (f - normal_pdf(v / sd) / sd).abs()).collect();
    let l1_error = trapezoid(&estimate.eval_grid, &diff);
    let ks = stats::ks_one_sample(samples, |v| normal_cdf(v / sd));
    Ok(DensityComparison { l1_error, ks_stat: ks.statistic, ks_p_value: ks.p_value })
}
