//! Subcommand pipelines. Each returns the names of failed probes.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{f, Sink, Table};
use fbh_core::domain::{DomainKind, DomainSpec, Point};
use fbh_core::fbm::{cov_rh, kstar_norm_sq, Hurst};
use fbh_core::heat_kernel::bounds::{analytic_bound, analytic_bound_max, singular_boundary_integral, verify_kernel_bounds, BoundMode};
use fbh_core::heat_kernel::table::{corner_excluded_entries, KernelTable};
use fbh_core::heat_kernel::{gaussian_kernel, kernel_parametrix, kernel_spectral, robin_eigensystem, KernelMethod, RobinKernel};
use fbh_core::malliavin::{d2u_field, dg_bound_probe, du_solve, dz_field, h_norm, lower_bound_probe, nondegeneracy_prob, Target, Window};
use fbh_core::nonlinear_solver::{contraction_diagnostics, interior_solution, picard_boundary, Nonlinearity, Smoothness};
use fbh_core::stoch_conv::{holder_probe, moment_probe, point_set_for, simulate_z, trace_probe, variance_z, z_field, Integrability, ProbeReport};
use fbh_core::density::{density_compare, kde, mc_ensemble};
use fbh_core::heat_kernel::DEFAULT_SWITCH;
use fbh_core::{stats, Model};
use serde::Serialize;

pub type Failures = Vec<String>;

fn point_label(p: &Point<f64>, kind: DomainKind) -> String {
    match kind {
        DomainKind::Interval => f(p.x),
        DomainKind::Rectangle => format!("{} {}", f(p.x), f(p.y)),
    }
}

fn check(failures: &mut Failures, name: &str, ok: bool) {
    if !ok {
        failures.push(name.to_string());
    }
}

fn domain_of(cfg: &RunConfig) -> Result<DomainSpec<f64>, CliError> {
    Ok(DomainSpec::build(cfg.model.kind, cfg.model.beta, cfg.model.boundary_resolution)?)
}

/// `p_N(t, x, ȳ)`; on the rectangle `x` is `(x, ½)` and `ȳ` is `(ȳ, 0)`.
pub fn kernel(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let domain = domain_of(cfg)?;
    let hybrid = RobinKernel::with_settings(&domain, cfg.model.n_modes, DEFAULT_SWITCH)?;
    let eigen = robin_eigensystem(&domain, cfg.model.n_modes)?;
    let place = |x: f64, height: f64| match domain.kind {
        DomainKind::Interval => Point::on_line(x),
        DomainKind::Rectangle => Point::new(x, height),
    };
    let mut table = Table::new(&["method", "t", "x", "ybar", "value"]);
    for &method in &cfg.kernel_methods {
        let name = match method {
            KernelMethod::Spectral => "spectral",
            KernelMethod::Parametrix => "parametrix",
            KernelMethod::Hybrid => "hybrid",
        };
        for &t in &cfg.kernel_times {
            for &x in &cfg.kernel_points {
                for &y in &cfg.kernel_ybar {
                    let (xp, yp) = (place(x, 0.5), place(y, 0.0));
                    let value = match method {
                        KernelMethod::Spectral => kernel_spectral(&eigen, t, &xp, &yp)?,
                        KernelMethod::Parametrix => kernel_parametrix(&domain, t, x, y, cfg.kernel_terms)?,
                        KernelMethod::Hybrid => hybrid.eval(t, &xp, &yp)?,
                    };
                    table.push(vec![name.into(), f(t), f(x), f(y), f(value)]);
                }
            }
        }
    }
    sink.table("kernel", &table)?;
    Ok(Vec::new())
}

pub const BOUND_DEPTHS: [f64; 4] = [0.05, 0.1, 0.2, 0.3];

/// Twelve log-spaced times in `[0.01, 0.2]`.
pub fn bound_times() -> Vec<f64> {
    (0..12).map(|i| 0.01 * 20f64.powf(i as f64 / 11.0)).collect()
}

pub fn verify_bounds(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let domain = domain_of(cfg)?;
    let kernel = RobinKernel::with_settings(&domain, cfg.model.n_modes, DEFAULT_SWITCH)?;
    let entries = corner_excluded_entries(&domain, &BOUND_DEPTHS);
    let table = KernelTable::build(&kernel, KernelMethod::Hybrid, &bound_times(), entries, 0)?;
    let modes = [BoundMode::Upper, BoundMode::Lower, BoundMode::GradientGaussian, BoundMode::GradientAlgebraic];
    let reports = modes.iter().map(|&m| verify_kernel_bounds(&table, m, cfg.mu)).collect::<Result<Vec<_>, _>>()?;
    sink.report("bounds", &reports)?;
    let mut failures = Vec::new();
    for r in &reports {
        check(&mut failures, &format!("{:?}", r.mode), r.satisfied);
    }
    Ok(failures)
}

/// Samples of `Z(t, x)` for the configured route plus the law and regularity probes.
pub fn convolve(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let model = Model::new(cfg.model.clone())?;
    let pc = &cfg.probe;
    let i = model.time_index(pc.t)?;
    let (set, p) = point_set_for(&model, pc.x)?;
    let route_name = match pc.route {
        fbh_core::stoch_conv::Route::Increment => "increment",
        fbh_core::stoch_conv::Route::ExactGaussian => "exact_gaussian",
    };
    let label = point_label(&pc.x, model.domain.kind);
    let mut table = Table::new(&["replica", "t", "x", "route", "value"]);
    let mut values = Vec::with_capacity(pc.replicas);
    for r in 0..pc.replicas as u64 {
        let s = simulate_z(&model, &set, p, &model.sample_noise(cfg.seed, r), i, pc.route, r)?;
        values.push(s.value);
        table.push(vec![r.to_string(), f(s.t), label.clone(), route_name.into(), f(s.value)]);
    }
    sink.table("samples", &table)?;

    let exact = variance_z(&model, &set, p, i)?;
    let empirical = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    let se = stats::std_error_of_second_moment(&values);
    let mut reports = vec![ProbeReport {
        probe: "variance".into(),
        params: [("t".into(), pc.t), ("replicas".into(), pc.replicas as f64)].into(),
        slope: None,
        values: vec![empirical, exact, se],
        satisfied: (empirical - exact).abs() <= 3.0 * se,
        flags: Vec::new(),
    }];
    reports.push(moment_probe(&model, pc.t, pc.x, pc.replicas, cfg.seed)?);
    if model.domain.boundary_distance(&pc.x) >= pc.min_distance {
        reports.push(holder_probe(&model, pc.t, pc.x, &pc.separations, pc.min_distance, pc.replicas, cfg.seed)?);
    }
    let trace_ok = model.domain.dim() == 1 || matches!(model.spec.alpha.integrability, Integrability::A1Prime { .. });
    if trace_ok {
        reports.push(trace_probe(&model, &pc.powers, pc.replicas, cfg.seed)?);
    }
    sink.report("probes", &reports)?;
    let mut failures = Vec::new();
    for r in &reports {
        check(&mut failures, &r.probe, r.satisfied);
    }
    Ok(failures)
}

fn interior_points(cfg: &RunConfig) -> Vec<Point<f64>> {
    cfg.probe
        .points
        .iter()
        .map(|&x| match cfg.model.kind {
            DomainKind::Interval => Point::on_line(x),
            DomainKind::Rectangle => Point::new(x, cfg.probe.x.y),
        })
        .collect()
}

/// One realization of the boundary field and interior values, with the
/// Picard history and contraction diagnostics.
pub fn solve(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let model = Model::new(cfg.model.clone())?;
    let noise = model.sample_noise(cfg.seed, 0);
    let (u, report) = picard_boundary(&model, &cfg.g, &noise, &cfg.solver)?;

    let mut boundary = Table::new(&["time", "node", "value"]);
    for (t, row) in u.times.iter().zip(&u.values) {
        for (j, v) in row.iter().enumerate() {
            boundary.push(vec![f(*t), j.to_string(), f(*v)]);
        }
    }
    sink.table("boundary", &boundary)?;

    let points = interior_points(cfg);
    let set = model.interior(&points)?;
    let mut interior = Table::new(&["t", "x", "value", "seed"]);
    for (i, t) in model.grid.nodes.iter().enumerate() {
        for (p, pt) in points.iter().enumerate() {
            let v = interior_solution(&set, &u, &cfg.g, &noise, i, p);
            interior.push(vec![f(*t), point_label(pt, model.domain.kind), f(v), cfg.seed.to_string()]);
        }
    }
    sink.table("interior", &interior)?;
    sink.report("picard", &report)?;

    let mut failures = Vec::new();
    match contraction_diagnostics(&model, &cfg.g, &u, &report, cfg.solver.norm.p, cfg.mu, &cfg.lambda_grid) {
        Ok(table) => {
            check(&mut failures, "contraction", table.satisfied);
            sink.report("contraction", &table)?;
        }
        Err(fbh_core::Error::InsufficientData(_)) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(failures)
}

/// Malliavin derivative of the boundary solution for one realization plus the
/// window, decay and non-degeneracy probes.
pub fn malliavin(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let model = Model::new(cfg.model.clone())?;
    let pc = &cfg.probe;
    let i = model.time_index(pc.t)?;
    if pc.node >= model.boundary.len() {
        return Err(CliError::Config(format!("probe.node {} exceeds the {} boundary nodes", pc.node, model.boundary.len())));
    }
    let noise = model.sample_noise(cfg.seed, 0);
    let (u, _) = picard_boundary(&model, &cfg.g, &noise, &cfg.solver)?;
    let du = du_solve(&model, &u, &cfg.g, Target::U, None)?;
    let nodes = &model.grid.nodes;
    let kind = model.domain.kind;
    let mut table = Table::new(&["r", "sigma", "t", "xi", "value", "order"]);
    for (k, sigma, ti, l, v) in du.entries().filter(|e| e.0 < e.2) {
        table.push(vec![f(nodes[k]), sigma.to_string(), f(nodes[ti]), point_label(&model.boundary.points[l], kind), f(v), "1".into()]);
    }
    if cfg.g.smoothness == Smoothness::G2 && i > 0 {
        let mut cells: Vec<usize> = vec![0, i / 4, i / 2];
        cells.dedup();
        let pairs: Vec<_> = cells.iter().map(|&k| ((k, 0), (k, 0))).collect();
        let second = d2u_field(&model, &u, &cfg.g, &pairs)?;
        for (((k, sigma), _), field) in second.pairs.iter().zip(&second.values) {
            for (ti, row) in field.iter().enumerate().filter(|(ti, _)| *ti > *k) {
                for (l, v) in row.iter().enumerate() {
                    table.push(vec![f(nodes[*k]), sigma.to_string(), f(nodes[ti]), point_label(&model.boundary.points[l], kind), f(*v), "2".into()]);
                }
            }
        }
    }
    sink.table("derivative", &table)?;

    let xi = model.boundary.points[pc.node];
    let mut reports = vec![lower_bound_probe(&model, pc.t, xi, &pc.deltas)?];
    let powers: Vec<f64> = pc.powers.iter().map(|&p| p as f64).collect();
    reports.extend(dg_bound_probe(&model, &cfg.g, &cfg.solver, pc.t, pc.node, &pc.deltas, &powers, cfg.mu, pc.replicas, cfg.seed)?);
    sink.report("probes", &reports)?;
    let decay = nondegeneracy_prob(&model, &cfg.g, &cfg.solver, pc.t, pc.node, None, pc.replicas, cfg.seed)?;
    sink.report("nondegeneracy", &decay)?;

    let mut failures = Vec::new();
    for r in &reports {
        check(&mut failures, &r.probe, r.satisfied);
    }
    check(&mut failures, "nondegeneracy", decay.satisfied);
    Ok(failures)
}

#[derive(Debug, Serialize)]
struct DensityReport {
    n_samples: usize,
    excluded: Vec<u64>,
    bandwidth: f64,
    integral: f64,
    oracle_variance: Option<f64>,
    comparison: Option<fbh_core::density::DensityComparison>,
}

/// Kernel density estimate of `u(t, x)`; compared with the exact Gaussian law when `g ≡ 0`.
pub fn density(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let model = Model::new(cfg.model.clone())?;
    let pc = &cfg.probe;
    let ens = mc_ensemble(&model, &cfg.g, &cfg.solver, pc.t, pc.x, cfg.density_samples, cfg.seed)?;
    let est = kde(&ens.samples, cfg.bandwidth)?;
    let mut table = Table::new(&["value", "density"]);
    for (v, d) in est.eval_grid.iter().zip(&est.values) {
        table.push(vec![f(*v), f(*d)]);
    }
    sink.table("density", &table)?;

    let gaussian = matches!(cfg.g.kind, fbh_core::nonlinear_solver::NonlinearityKind::Zero);
    let (oracle_variance, comparison) = if gaussian {
        let (set, p) = point_set_for(&model, pc.x)?;
        let v = variance_z(&model, &set, p, model.time_index(pc.t)?)?;
        (Some(v), Some(density_compare(&est, &ens.samples, v)?))
    } else {
        (None, None)
    };
    let report = DensityReport {
        n_samples: ens.samples.len(),
        excluded: ens.excluded,
        bandwidth: est.bandwidth,
        integral: est.integral(),
        oracle_variance,
        comparison,
    };
    sink.report("comparison", &report)?;
    let mut failures = Vec::new();
    check(&mut failures, "kde_mass", (report.integral - 1.0).abs() <= 0.02);
    if let Some(c) = &report.comparison {
        check(&mut failures, "ks", c.ks_p_value > 0.01);
    }
    Ok(failures)
}

#[derive(Debug, Serialize)]
struct Identity {
    name: &'static str,
    value: f64,
    expected: f64,
    tolerance: f64,
    passed: bool,
}

impl Identity {
    fn relative(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (value - expected).abs() <= tolerance * expected.abs().max(f64::MIN_POSITIVE);
        Self { name, value, expected, tolerance, passed }
    }

    fn absolute(name: &'static str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self { name, value, expected, tolerance, passed: (value - expected).abs() <= tolerance }
    }
}

/// Deterministic identities that must hold for any valid configuration.
pub fn selftest(cfg: &RunConfig, sink: &mut Sink) -> Result<Failures, CliError> {
    let mut checks = Vec::new();

    let bm = Hurst::new(0.5)?;
    checks.push(Identity::absolute("brownian_covariance", cov_rh(bm, 0.3, 0.7), 0.3, 1e-15));
    let h = if cfg.model.hurst > 0.5 { cfg.model.hurst } else { 0.75 };
    let t = 0.5f64;
    let iso = kstar_norm_sq(&|_s: f64| 1.0, t, Hurst::new(h)?)?;
    checks.push(Identity::relative("isometry_indicator", iso, t.powf(2.0 * h), 1e-3));

    let line = DomainSpec::build(DomainKind::Interval, cfg.model.beta, 1)?;
    let empty = kernel_parametrix(&line, 0.05, 0.3, 0.0, 0)?;
    checks.push(Identity::relative("parametrix_empty_series", empty, 2.0 * gaussian_kernel(0.05, 0.09, 1), 1e-14));
    let eigen = robin_eigensystem(&line, cfg.model.n_modes)?;
    let hybrid = RobinKernel::with_settings(&line, cfg.model.n_modes, DEFAULT_SWITCH)?;
    let (x, y) = (Point::on_line(0.3), Point::on_line(0.0));
    checks.push(Identity::relative("spectral_vs_hybrid", hybrid.eval(0.05, &x, &y)?, kernel_spectral(&eigen, 0.05, &x, &y)?, 1e-8));
    checks.push(Identity::relative("analytic_bound_maximum", analytic_bound(2.0, 2.0)?, analytic_bound_max(2.0), 1e-15));
    let square = DomainSpec::build(DomainKind::Rectangle, 1.0, 4)?;
    let perimeter = singular_boundary_integral(&square, 0.0, 0.0, &Point::new(0.5, 0.0), &Point::new(1.0, 0.5))?;
    checks.push(Identity::relative("boundary_measure", perimeter, 4.0, 1e-10));

    let model = Model::new(cfg.model.clone())?;
    let zero = Nonlinearity::zero();
    let noise = model.sample_noise(cfg.seed, 0);
    let (u, _) = picard_boundary(&model, &zero, &noise, &cfg.solver)?;
    let z = z_field(&model.boundary, &noise);
    let gap = u.values.iter().flatten().zip(z.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Identity::absolute("picard_zero_returns_z", gap, 0.0, 0.0));
    let du = du_solve(&model, &u, &zero, Target::U, None)?;
    let dz = dz_field(&model, &model.boundary, Target::Z);
    checks.push(Identity::absolute("malliavin_linear_oracle", du.max_abs_diff(&dz), 0.0, 1e-12));
    let i = model.n_steps();
    let norm = h_norm(&model, &dz.cells_at(i, 0), i, Window::Full)?.value;
    checks.push(Identity::relative("dz_norm_equals_variance", norm, variance_z(&model, &model.boundary, 0, i)?, 1e-6));

    sink.report("selftest", &checks)?;
    Ok(checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect())
}
