//! Acceptance suite: one PASS/FAIL line per criterion.

use fbh_core::density::{density_compare, kde, mc_ensemble};
use fbh_core::domain::{DomainKind, DomainSpec, Point, SMesh, TimeGrid};
use fbh_core::fbm::{cov_rh, h_inner, kstar_norm_sq, substream, FbmSampler, Hurst};
use fbh_core::heat_kernel::bounds::{singular_boundary_integral, verify_kernel_bounds, BoundMode};
use fbh_core::heat_kernel::eigen::IntervalEigen;
use fbh_core::heat_kernel::spectral::interval_spectral;
use fbh_core::heat_kernel::table::{corner_excluded_entries, KernelTable};
use fbh_core::heat_kernel::{gaussian_kernel, KernelMethod, Parametrix, RobinKernel};
use fbh_core::malliavin::{
    dg_bound_probe, du_solve, dz_field, h_norm, lower_bound_probe, nondegeneracy_prob, perturbation_check, Target, Window,
};
use fbh_core::nonlinear_solver::{
    contraction_diagnostics, picard_boundary, Nonlinearity, NonlinearityKind, SolverSettings,
};
use fbh_core::stats::{loglog_slope, ks_two_sample, mean, std_error_of_mean, std_error_of_second_moment};
use fbh_core::stoch_conv::{holder_probe, simulate_z, trace_probe, variance_z, z_field, AlphaCoefficient, Route};
use fbh_core::volterra::cumulative_cell_integral;
use fbh_core::{Model, ModelSpec};
use rand::Rng;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

/// Criteria that fail at the pinned tolerance, with the sub-case that fails.
const KNOWN_RED: &[(u8, &str)] = &[(3, "beta=2 t=0.1")];

fn model(f: impl FnOnce(&mut ModelSpec)) -> Model {
    let mut spec = ModelSpec::interval();
    f(&mut spec);
    Model::new(spec).expect("model")
}

fn c1_fbm_covariance() -> Outcome {
    let replicas = 10_000;
    let mut detail = Vec::new();
    let mut ok = true;
    for h in [0.75, 0.5] {
        let hurst = Hurst::new(h).map_err(|e| e.to_string())?;
        let grid = TimeGrid::new(1.0, 16).map_err(|e| e.to_string())?;
        let mesh = SMesh::uniform(2, 1.0).map_err(|e| e.to_string())?;
        let sampler = FbmSampler::new(&grid, hurst).map_err(|e| e.to_string())?;
        let paths: Vec<_> = (0..replicas).map(|r| sampler.sample(&mesh, 1001, r)).collect();
        let mut worst = 0.0f64;
        for (j, cell) in mesh.cells.iter().enumerate() {
            for i in 1..=grid.n_steps {
                for k in i..=grid.n_steps {
                    let prods: Vec<f64> = paths.iter().map(|p| p.values[j][i] * p.values[j][k]).collect();
                    let exact = cov_rh(hurst, grid.nodes[i], grid.nodes[k]) * cell.measure;
                    worst = worst.max((mean(&prods) - exact).abs() / std_error_of_mean(&prods));
                }
            }
        }
        ok &= worst <= 3.0;
        detail.push(format!("H={h}: worst |diff|/se {worst:.2}"));
    }
    let brownian = Hurst::new(0.5).map_err(|e| e.to_string())?;
    let bm = (1..=10).all(|i| {
        (1..=10).all(|k| (cov_rh(brownian, i as f64 / 10.0, k as f64 / 10.0) - i.min(k) as f64 / 10.0).abs() < 1e-15)
    });
    detail.push(format!("H=1/2 covariance is min(t,s): {bm}"));
    Ok((ok && bm, detail.join("; ")))
}

fn c2_isometry() -> Outcome {
    let h = Hurst::new(0.75).map_err(|e| e.to_string())?;
    let t = 1.0;
    let grid = TimeGrid::new(t, 2000).map_err(|e| e.to_string())?;
    let mesh = SMesh::uniform(1, 1.0).map_err(|e| e.to_string())?;
    let integrands: [fn(f64) -> f64; 5] = [
        |s| 1.0 + s,
        |s| s * s,
        |s| (-s).exp(),
        |s| (2.0 * std::f64::consts::PI * s).cos(),
        |s| (std::f64::consts::PI * s).sin() + 0.5,
    ];
    let mut worst = 0.0f64;
    for phi in integrands {
        let lhs = kstar_norm_sq(&phi, t, h).map_err(|e| e.to_string())?;
        let rhs = h_inner(|s, _| phi(s), |s, _| phi(s), &mesh, &grid, h).map_err(|e| e.to_string())?;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    let mut ind = 0.0f64;
    for t in [0.25, 0.5, 1.0] {
        let v = kstar_norm_sq(&|_: f64| 1.0, t, h).map_err(|e| e.to_string())?;
        ind = ind.max((v - t.powf(1.5)).abs());
    }
    Ok((worst < 0.01 && ind < 1e-3, format!("smooth max rel {worst:.2e}; indicator max abs {ind:.2e}")))
}

fn c3_kernel_cross_validation() -> Outcome {
    let mut failing = Vec::new();
    let mut errors = Vec::new();
    for beta in [0.5, 1.0, 2.0] {
        let sys = IntervalEigen::<f64>::new(beta, 400).map_err(|e| e.to_string())?;
        for t in [0.02, 0.05, 0.1] {
            let p = Parametrix::new(beta, t, 6).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
                for y in [0.0, 1.0] {
                    let s = interval_spectral(&sys, t, x, y).map_err(|e| e.to_string())?;
                    let v = p.eval(x, y).map_err(|e| e.to_string())?;
                    worst = worst.max(((v - s) / s).abs());
                }
            }
            if worst >= 1e-3 {
                failing.push(format!("beta={beta} t={t}"));
                errors.push(format!("{worst:.2e}"));
            }
        }
    }
    let t = 0.05;
    let p = Parametrix::new(0.0, t, 6).map_err(|e| e.to_string())?;
    let mut images = 0.0f64;
    for x in [0.1, 0.35, 0.6, 0.9] {
        let oracle: f64 = (-4..=4).map(|k| 2.0 * gaussian_kernel(t, (x + 2.0 * k as f64).powi(2), 1)).sum();
        images = images.max((p.eval(x, 0.0).map_err(|e| e.to_string())? - oracle).abs());
    }
    if images >= 1e-4 {
        failing.push("beta=0 images".into());
    }
    let detail = format!("failing [{}] rel [{}]; beta=0 images max abs {images:.2e}", failing.join(", "), errors.join(", "));
    Ok((failing.is_empty(), detail))
}

fn c4_kernel_bounds() -> Outcome {
    let times: Vec<f64> = (0..12).map(|i| 0.01 * 20f64.powf(i as f64 / 11.0)).collect();
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in [DomainKind::Interval, DomainKind::Rectangle] {
        let d = DomainSpec::build(kind, 1.0, 4).map_err(|e| e.to_string())?;
        let k = RobinKernel::new(&d).map_err(|e| e.to_string())?;
        let entries = corner_excluded_entries(&d, &[0.05, 0.1, 0.2, 0.3]);
        let table = KernelTable::build(&k, KernelMethod::Hybrid, &times, entries, 0).map_err(|e| e.to_string())?;
        for mode in [BoundMode::Upper, BoundMode::Lower, BoundMode::GradientGaussian, BoundMode::GradientAlgebraic] {
            let r = verify_kernel_bounds(&table, mode, 0.75).map_err(|e| e.to_string())?;
            let good = r.satisfied && r.constant.is_finite() && r.constant > 0.0;
            ok &= good;
            if !good {
                detail.push(format!("{kind:?} {mode:?} constant {}", r.constant));
            }
        }
    }
    let d = DomainSpec::build(DomainKind::Rectangle, 1.0, 4).map_err(|e| e.to_string())?;
    let p = |s: f64| Point::new(s, 0.0);
    let seps: Vec<f64> = (0..10).map(|i| 1e-3 * 10f64.powf(i as f64 * 2.0 / 9.0)).collect();
    let vals = seps
        .iter()
        .map(|&s| singular_boundary_integral(&d, 0.75, 0.75, &p(0.5 - s / 2.0), &p(0.5 + s / 2.0)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let slope = loglog_slope(&seps, &vals).map_err(|e| e.to_string())?;
    ok &= (slope + 0.5).abs() < 0.05;
    detail.push(format!("8 bound checks finite; boundary integral exponent {slope:.4}"));
    Ok((ok, detail.join("; ")))
}

fn c5_convolution_law() -> Outcome {
    let m = model(|_| {});
    let set = m.interior(&[Point::on_line(0.5)]).map_err(|e| e.to_string())?;
    let i = m.time_index(0.5).map_err(|e| e.to_string())?;
    let n = 10_000u64;
    let draw = |route: Route, seed: u64| -> Result<Vec<f64>, String> {
        (0..n)
            .map(|r| simulate_z(&m, &set, 0, &m.sample_noise(seed, r), i, route, r).map(|s| s.value))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())
    };
    let inc = draw(Route::Increment, 501)?;
    let exact = draw(Route::ExactGaussian, 502)?;
    let ks = ks_two_sample(&inc, &exact);
    let v = variance_z(&m, &set, 0, i).map_err(|e| e.to_string())?;
    let emp = inc.iter().map(|x| x * x).sum::<f64>() / n as f64;
    let se = std_error_of_second_moment(&inc);
    let kurt = inc.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64 / (emp * emp);
    let ok = ks.p_value > 0.01 && (emp - v).abs() <= 3.0 * se && (kurt - 3.0).abs() < 0.3;
    Ok((ok, format!("KS p {:.3}; variance {emp:.4} vs {v:.4} (se {se:.4}); kurtosis {kurt:.3}", ks.p_value)))
}

fn c6_interior_regularity() -> Outcome {
    let m = model(|_| {});
    let r = holder_probe(&m, 0.5, Point::on_line(0.25), &[0.0025, 0.005, 0.01, 0.02], 0.2, 4000, 601)
        .map_err(|e| e.to_string())?;
    let slope = r.slope.unwrap_or(f64::NAN);
    Ok(((1.8..=2.2).contains(&slope), format!("slope {slope:.3}")))
}

fn c7_boundary_trace() -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    let cases: [(&str, Model); 2] = [
        ("interval", model(|s| s.n_steps = 50)),
        (
            "rectangle",
            model(|s| {
                s.kind = DomainKind::Rectangle;
                s.boundary_resolution = 4;
                s.n_steps = 25;
                s.alpha = AlphaCoefficient::constant(1.0).with_theta(3.0);
            }),
        ),
    ];
    for (name, m) in cases {
        let r = trace_probe(&m, &[2, 4], 2000, 701).map_err(|e| e.to_string())?;
        ok &= r.satisfied;
        let ratio = r.params.get("worst_max_over_median").copied().unwrap_or(f64::NAN);
        detail.push(format!("{name} worst max/median {ratio:.2}, sup moments {:.3?}", r.values));
    }
    Ok((ok, detail.join("; ")))
}

fn c8_picard() -> Outcome {
    let m = model(|_| {});
    let s = SolverSettings::default_for(1.0);
    let noise = m.sample_noise(801, 0);
    let z = z_field(&m.boundary, &noise);
    let (u0, _) = picard_boundary(&m, &Nonlinearity::zero(), &noise, &s).map_err(|e| e.to_string())?;
    let zero_ok = u0.values == z;

    let c = 0.7;
    let g = Nonlinearity::new(NonlinearityKind::Constant(c)).map_err(|e| e.to_string())?;
    let (uc, _) = picard_boundary(&m, &g, &noise, &s).map_err(|e| e.to_string())?;
    let mut const_err = 0.0f64;
    for i in [1, 10, 50, 100] {
        let t = m.grid.nodes[i];
        for (j, x) in m.boundary.points.iter().enumerate() {
            let mut oracle = 0.0;
            for node in &m.domain.nodes {
                oracle += cumulative_cell_integral(|tau| m.kernel.cell_integral(tau, x, node), t).map_err(|e| e.to_string())?;
            }
            const_err = const_err.max((uc.values[i][j] - z[i][j] - c * oracle).abs());
        }
    }

    let tanh = Nonlinearity::tanh();
    let (ut, rep) = picard_boundary(&m, &tanh, &noise, &s).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = rep.increment_norms.windows(2).skip(1).map(|w| w[1] / w[0]).collect();
    let contracting = ratios.iter().all(|&r| r < 1.0);
    let diag = contraction_diagnostics(&m, &tanh, &ut, &rep, 2.0, 0.75, &[1.0, 10.0, 100.0]).map_err(|e| e.to_string())?;
    let factors: Vec<f64> = diag.rows.iter().map(|r| r.factor).collect();
    let decreasing = factors.windows(2).all(|w| w[1] < w[0]);
    let ok = zero_ok && const_err < 1e-8 && contracting && decreasing;
    Ok((
        ok,
        format!(
            "g=0 exact: {zero_ok}; g=c max err {const_err:.1e}; worst ratio from iterate 2 {:.3}; factors {factors:.3?}",
            ratios.iter().copied().fold(0.0, f64::max)
        ),
    ))
}

fn c9_malliavin_oracles() -> Outcome {
    let m = model(|s| s.n_steps = 60);
    let s = SolverSettings { tol: 1e-13, ..SolverSettings::default_for(1.0) };
    let noise = m.sample_noise(901, 0);
    let zero = Nonlinearity::zero();
    let (u, _) = picard_boundary(&m, &zero, &noise, &s).map_err(|e| e.to_string())?;
    let du = du_solve(&m, &u, &zero, Target::U, None).map_err(|e| e.to_string())?;
    let dz = dz_field(&m, &m.boundary, Target::Z);
    let diff = du.max_abs_diff(&dz);
    let i = m.n_steps();
    let norm = h_norm(&m, &dz.cells_at(i, 0), i, Window::Full).map_err(|e| e.to_string())?.value;
    let var = variance_z(&m, &m.boundary, 0, i).map_err(|e| e.to_string())?;
    let norm_err = (norm - var).abs() / var;

    let tanh = Nonlinearity::tanh();
    let mut rng = substream(902, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let i = rng.random_range(2..=m.n_steps());
        let k = rng.random_range(0..i);
        let sigma = rng.random_range(0..m.s_mesh.len());
        let node = rng.random_range(0..m.boundary.len());
        let (fd, d) = perturbation_check(&m, &tanh, &s, &noise, (k, sigma), i, node, 1e-4).map_err(|e| e.to_string())?;
        worst = worst.max((fd - d).abs() / d.abs());
    }
    let ok = diff == 0.0 && norm_err < 1e-6 && worst < 5e-2;
    Ok((ok, format!("max |Du - DZ| {diff:.1e}; norm vs variance rel {norm_err:.1e}; perturbation rel {worst:.1e}")))
}

fn c10_lower_bound_scaling() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for h in [0.6, 0.75] {
        let m = model(|s| {
            s.beta = 0.5;
            s.horizon = 0.5;
            s.n_steps = 500;
            s.hurst = h;
        });
        let r = lower_bound_probe(&m, 0.5, Point::on_line(0.0), &[0.01, 0.02, 0.05, 0.1, 0.2]).map_err(|e| e.to_string())?;
        let slope = r.slope.unwrap_or(f64::NAN);
        let target = 2.0 * h - 1.0;
        ok &= (slope - target).abs() <= 0.1 && r.values.iter().all(|&v| v > 0.0) && r.flags.is_empty();
        detail.push(format!("H={h}: slope {slope:.3} vs {target:.2}"));
    }
    Ok((ok, detail.join("; ")))
}

fn c11_dg_decay() -> Outcome {
    let m = model(|s| s.n_steps = 50);
    let s = SolverSettings::default_for(1.0);
    let reports = dg_bound_probe(&m, &Nonlinearity::tanh(), &s, 0.5, 0, &[0.02, 0.05, 0.1, 0.2], &[2.0], 0.75, 500, 1101)
        .map_err(|e| e.to_string())?;
    let slope = reports[0].slope.unwrap_or(f64::NAN);
    let required = 2.0 * (1.0 - 0.75) - 0.2;
    Ok((slope >= required, format!("exponent {slope:.3} (required >= {required:.2})")))
}

fn c12_nondegeneracy() -> Outcome {
    let m = model(|s| s.n_steps = 50);
    let s = SolverSettings::default_for(1.0);
    let r = nondegeneracy_prob(&m, &Nonlinearity::tanh(), &s, 0.5, 0, None, 10_000, 1201).map_err(|e| e.to_string())?;
    let monotone = r.probabilities.windows(2).all(|w| w[1] <= w[0]);
    let last_zero = r.probabilities.last() == Some(&0.0);
    Ok((monotone && last_zero, format!("eps {:.3?} -> P {:?}", r.epsilons, r.probabilities)))
}

fn c13_density() -> Outcome {
    let m = model(|s| {
        s.horizon = 0.5;
        s.n_steps = 50;
    });
    let x = Point::on_line(0.5);
    let s = SolverSettings::default_for(0.5);
    let ens = mc_ensemble(&m, &Nonlinearity::zero(), &s, 0.5, x, 100_000, 1301).map_err(|e| e.to_string())?;
    let est = kde(&ens.samples, None).map_err(|e| e.to_string())?;
    let set = m.interior(&[x]).map_err(|e| e.to_string())?;
    let v = variance_z(&m, &set, 0, m.n_steps()).map_err(|e| e.to_string())?;
    let c = density_compare(&est, &ens.samples, v).map_err(|e| e.to_string())?;
    let mass = est.integral();
    let ok = c.l1_error < 0.05 && c.ks_p_value > 0.01 && (mass - 1.0).abs() < 0.02;
    Ok((ok, format!("L1 {:.4}; KS p {:.3}; mass {mass:.4}", c.l1_error, c.ks_p_value)))
}

fn c14_reproducibility() -> Outcome {
    let exe = env!("CARGO_BIN_EXE_fbh");
    let run = |out: &Path, args: &[&str]| {
        Command::new(exe).env("FBH_OUTPUT_DIR", out).args(args).output().map_err(|e| e.to_string())
    };
    let base = ["--set", "time.steps=20", "--set", "probe.replicas=200", "--set", "density.samples=300"];
    let commands = ["kernel", "convolve", "solve", "malliavin", "density", "verify-bounds", "selftest"];
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for cmd in commands {
        let a = run(first.path(), &[&base[..], &["--seed", "1401", cmd]].concat())?;
        let dir = first.path().join(cmd);
        let echo = dir.join("config.echo");
        let b = run(second.path(), &["--config", echo.to_str().unwrap_or_default(), cmd])?;
        if a.status.code() != b.status.code() {
            return Ok((false, format!("{cmd}: exit {:?} vs {:?}", a.status.code(), b.status.code())));
        }
        let manifest: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.join("manifest.json")).map_err(|e| format!("{cmd}: {e}"))?,
        )
        .map_err(|e| e.to_string())?;
        for out in manifest["outputs"].as_array().into_iter().flatten() {
            let name = out["file"].as_str().unwrap_or_default();
            let x = std::fs::read(dir.join(name)).map_err(|e| e.to_string())?;
            let y = std::fs::read(second.path().join(cmd).join(name)).map_err(|e| e.to_string())?;
            if x != y {
                return Ok((false, format!("{cmd}/{name} differs")));
            }
            compared += 1;
        }
    }
    Ok((true, format!("{compared} artifacts identical across {} subcommands", commands.len())))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "fBm covariance", budget: Duration::from_secs(60), run: c1_fbm_covariance },
        Criterion { id: 2, name: "isometry", budget: Duration::from_secs(60), run: c2_isometry },
        Criterion { id: 3, name: "kernel cross-validation", budget: Duration::from_secs(120), run: c3_kernel_cross_validation },
        Criterion { id: 4, name: "kernel bounds", budget: Duration::from_secs(120), run: c4_kernel_bounds },
        Criterion { id: 5, name: "stochastic convolution law", budget: Duration::from_secs(300), run: c5_convolution_law },
        Criterion { id: 6, name: "interior regularity", budget: Duration::from_secs(300), run: c6_interior_regularity },
        Criterion { id: 7, name: "boundary trace", budget: Duration::from_secs(120), run: c7_boundary_trace },
        Criterion { id: 8, name: "Picard solver", budget: Duration::from_secs(120), run: c8_picard },
        Criterion { id: 9, name: "Malliavin linear oracle", budget: Duration::from_secs(600), run: c9_malliavin_oracles },
        Criterion { id: 10, name: "lower-bound scaling", budget: Duration::from_secs(120), run: c10_lower_bound_scaling },
        Criterion { id: 11, name: "DG decay", budget: Duration::from_secs(600), run: c11_dg_decay },
        Criterion { id: 12, name: "non-degeneracy", budget: Duration::from_secs(1800), run: c12_nondegeneracy },
        Criterion { id: 13, name: "density", budget: Duration::from_secs(600), run: c13_density },
        Criterion { id: 14, name: "reproducibility", budget: Duration::from_secs(120), run: c14_reproducibility },
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for c in &criteria {
        let start = Instant::now();
        let (ok, detail) = match (c.run)() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        let elapsed = start.elapsed();
        let in_budget = elapsed <= c.budget;
        let pass = ok && in_budget;
        println!(
            "criterion {:>2} {:<28} {} ({detail}; {:.1}s of {}s)",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
        let known = KNOWN_RED.iter().find(|(id, _)| *id == c.id);
        match (pass, known) {
            (true, None) => passed += 1,
            (true, Some(_)) => unexpected.push(format!("criterion {} now passes; update the known failures", c.id)),
            (false, Some((_, case))) if !ok && detail.starts_with(&format!("failing [{case}]")) => {}
            (false, _) => unexpected.push(format!("criterion {}: {detail}", c.id)),
        }
    }
    println!("acceptance: {passed}/{} PASS, {} known FAIL", criteria.len(), KNOWN_RED.len());
    if !unexpected.is_empty() {
        for u in &unexpected {
            eprintln!("{u}");
        }
        std::process::exit(1);
    }
}
