//! Flat `section.key = value` run configuration.

use crate::error::CliError;
use fbh_core::domain::{DomainKind, Point};
use fbh_core::fbm::Hurst;
use fbh_core::heat_kernel::KernelMethod;
use fbh_core::nonlinear_solver::{Nonlinearity, NonlinearityKind, SolverSettings, WeightedNorm};
use fbh_core::stoch_conv::{AlphaCoefficient, AlphaKind, Route};
use fbh_core::ModelSpec;
use std::collections::BTreeMap;
use std::str::FromStr;

/// Every recognised key with its default value, in echo order.
const DEFAULTS: &[(&str, &str)] = &[
    ("domain.kind", "interval"),
    ("domain.beta", "1"),
    ("domain.boundary_resolution", "4"),
    ("time.horizon", "1"),
    ("time.steps", "100"),
    ("noise.hurst", "0.75"),
    ("noise.s_cells", "2"),
    ("noise.s_measure", "1"),
    ("noise.seed", "20240917"),
    ("alpha.kind", "constant"),
    ("alpha.value", "1"),
    ("alpha.theta", "none"),
    ("g.kind", "tanh"),
    ("g.value", "1"),
    ("solver.tol", "1e-10"),
    ("solver.max_iter", "200"),
    ("solver.lambda", "none"),
    ("solver.p", "2"),
    ("solver.mu", "0.75"),
    ("solver.lambda_grid", "1,10,50"),
    ("kernel.method", "spectral,parametrix,hybrid"),
    ("kernel.modes", "400"),
    ("kernel.terms", "6"),
    ("kernel.times", "0.02,0.05,0.1"),
    ("kernel.points", "0,0.25,0.5,0.75,1"),
    ("kernel.ybar", "0,1"),
    ("probe.replicas", "1000"),
    ("probe.t", "0.5"),
    ("probe.x", "0.25"),
    ("probe.y", "0.5"),
    ("probe.node", "0"),
    ("probe.points", "0.25,0.5,0.75"),
    ("probe.deltas", "0.02,0.05,0.1,0.2"),
    ("probe.separations", "0.0025,0.005,0.01,0.02"),
    ("probe.powers", "2,4"),
    ("probe.min_distance", "0.05"),
    ("probe.route", "increment"),
    ("density.samples", "2000"),
    ("density.bandwidth", "none"),
    ("output.dir", "fbh-out"),
    ("output.format", "csv"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    raw: BTreeMap<&'static str, String>,
    pub model: ModelSpec,
    pub seed: u64,
    pub g: Nonlinearity,
    pub solver: SolverSettings,
    pub mu: f64,
    pub lambda_grid: Vec<f64>,
    pub kernel_methods: Vec<KernelMethod>,
    pub kernel_terms: usize,
    pub kernel_times: Vec<f64>,
    pub kernel_points: Vec<f64>,
    pub kernel_ybar: Vec<f64>,
    pub probe: ProbeConfig,
    pub density_samples: usize,
    pub bandwidth: Option<f64>,
    pub output_dir: String,
    pub format: OutputFormat,
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub replicas: usize,
    pub t: f64,
    pub x: Point<f64>,
    pub node: usize,
    pub points: Vec<f64>,
    pub deltas: Vec<f64>,
    pub separations: Vec<f64>,
    pub powers: Vec<i32>,
    pub min_distance: f64,
    pub route: Route,
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn split_assignment(text: &str) -> Result<(String, String), CliError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("expected `key = value`, got `{}`", text.trim())))?;
    Ok((k.trim().to_string(), unquote(v).to_string()))
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = v.split(',').map(|s| num(key, s.trim())).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn optional(key: &str, v: &str) -> Result<Option<f64>, CliError> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl RunConfig {
    /// Parses config text and applies `key=value` overrides in order.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut raw: BTreeMap<&'static str, String> = DEFAULTS.iter().map(|(k, v)| (*k, v.to_string())).collect();
        let mut assign = |k: String, v: String, origin: &str| -> Result<(), CliError> {
            let key = DEFAULTS
                .iter()
                .map(|(k, _)| *k)
                .find(|d| *d == k)
                .ok_or_else(|| CliError::Config(format!("unknown config key `{k}` ({origin})")))?;
            raw.insert(key, v);
            Ok(())
        };
        for (n, line) in text.lines().enumerate() {
            let line = strip_comment(line).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_assignment(line).map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
            assign(k, v, &format!("line {}", n + 1))?;
        }
        for o in overrides {
            let (k, v) = split_assignment(o)?;
            assign(k, v, "--set")?;
        }
        Self::from_raw(raw)
    }

    fn from_raw(raw: BTreeMap<&'static str, String>) -> Result<Self, CliError> {
        let get = |k: &str| raw[k].as_str();
        let core = |e: fbh_core::Error| CliError::Config(e.to_string());

        let hurst: f64 = num("noise.hurst", get("noise.hurst"))?;
        Hurst::new(hurst).map_err(core)?;
        let kind = DomainKind::from_str(get("domain.kind")).map_err(core)?;
        let mut alpha = match AlphaKind::from_str(get("alpha.kind")).map_err(core)? {
            AlphaKind::Constant(_) => AlphaCoefficient::constant(num("alpha.value", get("alpha.value"))?),
            AlphaKind::Sinusoidal => AlphaCoefficient::sinusoidal(),
            AlphaKind::Degenerate => AlphaCoefficient::degenerate(),
        };
        if let Some(theta) = optional("alpha.theta", get("alpha.theta"))? {
            alpha = alpha.with_theta(theta);
        }
        alpha.validate(Hurst::new(hurst).map_err(core)?, kind.dim()).map_err(core)?;
        let model = ModelSpec {
            kind,
            beta: num("domain.beta", get("domain.beta"))?,
            boundary_resolution: num("domain.boundary_resolution", get("domain.boundary_resolution"))?,
            horizon: num("time.horizon", get("time.horizon"))?,
            n_steps: num("time.steps", get("time.steps"))?,
            s_cells: num("noise.s_cells", get("noise.s_cells"))?,
            s_measure: num("noise.s_measure", get("noise.s_measure"))?,
            hurst,
            alpha,
            n_modes: num("kernel.modes", get("kernel.modes"))?,
        };

        let gv: f64 = num("g.value", get("g.value"))?;
        let g = Nonlinearity::new(match NonlinearityKind::from_str(get("g.kind")).map_err(core)? {
            NonlinearityKind::Constant(_) => NonlinearityKind::Constant(gv),
            NonlinearityKind::Linear(_) => NonlinearityKind::Linear(gv),
            NonlinearityKind::ScaledTanh(_) => NonlinearityKind::ScaledTanh(gv),
            k => k,
        })
        .map_err(core)?;

        let mut norm = WeightedNorm::default_for(model.horizon);
        if let Some(l) = optional("solver.lambda", get("solver.lambda"))? {
            norm.lambda = l;
        }
        norm.p = num("solver.p", get("solver.p"))?;
        if norm.lambda.is_nan() || norm.lambda <= 0.0 || norm.p.is_nan() || norm.p < 1.0 {
            return Err(CliError::Config("solver.lambda must be positive and solver.p at least 1".into()));
        }
        let solver = SolverSettings {
            tol: num("solver.tol", get("solver.tol"))?,
            max_iter: num("solver.max_iter", get("solver.max_iter"))?,
            norm,
        };
        let mu: f64 = num("solver.mu", get("solver.mu"))?;
        if !(mu > 0.5 && mu < 1.0) {
            return Err(CliError::Config(format!("solver.mu out of range (0.5, 1): {mu}")));
        }

        let kernel_methods = get("kernel.method")
            .split(',')
            .map(|s| KernelMethod::from_str(s.trim()).map_err(core))
            .collect::<Result<_, _>>()?;

        let px: f64 = num("probe.x", get("probe.x"))?;
        let py: f64 = num("probe.y", get("probe.y"))?;
        let probe = ProbeConfig {
            replicas: num("probe.replicas", get("probe.replicas"))?,
            t: num("probe.t", get("probe.t"))?,
            x: match kind {
                DomainKind::Interval => Point::on_line(px),
                DomainKind::Rectangle => Point::new(px, py),
            },
            node: num("probe.node", get("probe.node"))?,
            points: list("probe.points", get("probe.points"))?,
            deltas: list("probe.deltas", get("probe.deltas"))?,
            separations: list("probe.separations", get("probe.separations"))?,
            powers: list("probe.powers", get("probe.powers"))?,
            min_distance: num("probe.min_distance", get("probe.min_distance"))?,
            route: Route::from_str(get("probe.route")).map_err(core)?,
        };

        let format = match get("output.format") {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => return Err(CliError::Config(format!("output.format must be csv or json, got {other}"))),
        };

        Ok(Self {
            seed: num("noise.seed", get("noise.seed"))?,
            model,
            g,
            solver,
            mu,
            lambda_grid: list("solver.lambda_grid", get("solver.lambda_grid"))?,
            kernel_methods,
            kernel_terms: num("kernel.terms", get("kernel.terms"))?,
            kernel_times: list("kernel.times", get("kernel.times"))?,
            kernel_points: list("kernel.points", get("kernel.points"))?,
            kernel_ybar: list("kernel.ybar", get("kernel.ybar"))?,
            probe,
            density_samples: num("density.samples", get("density.samples"))?,
            bandwidth: optional("density.bandwidth", get("density.bandwidth"))?,
            output_dir: get("output.dir").to_string(),
            format,
            raw,
        })
    }

    /// Replaces the master seed.
    pub fn with_seed(self, seed: u64) -> Result<Self, CliError> {
        let mut raw = self.raw;
        raw.insert("noise.seed", seed.to_string());
        Self::from_raw(raw)
    }

    /// Canonical text that parses back to this configuration.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, _) in DEFAULTS {
            let sec = key.split('.').next().unwrap_or_default();
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            let v = &self.raw[key];
            if v.contains('#') || v.contains(char::is_whitespace) {
                out.push_str(&format!("{key} = \"{v}\"\n"));
            } else {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_and_echo_round_trips() {
        let c = RunConfig::parse("", &[]).unwrap();
        assert_eq!(c.model.hurst, 0.75);
        assert_eq!(c.solver.norm.lambda, 50.0);
        let again = RunConfig::parse(&c.echo(), &[]).unwrap();
        assert_eq!(again.echo(), c.echo());
    }

    #[test]
    fn comments_quotes_and_overrides() {
        let text = "# run\nnoise.hurst = 0.6  # rougher\noutput.dir = \"out # 1\"\n";
        let c = RunConfig::parse(text, &["time.steps=40".into()]).unwrap();
        assert_eq!(c.model.hurst, 0.6);
        assert_eq!(c.model.n_steps, 40);
        assert_eq!(c.output_dir, "out # 1");
        assert_eq!(RunConfig::parse(&c.echo(), &[]).unwrap().output_dir, "out # 1");
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(matches!(RunConfig::parse("noise.hurts = 0.7", &[]), Err(CliError::Config(_))));
        let e = RunConfig::parse("noise.hurst = 0.4", &[]).unwrap_err();
        assert!(e.to_string().contains("noise.hurst out of range"));
        assert!(RunConfig::parse("solver.mu = 0.5", &[]).is_err());
        assert!(RunConfig::parse("domain.kind = rectangle\nalpha.theta = 1", &[]).is_err());
        assert!(RunConfig::parse("domain.kind = rectangle\nalpha.theta = 3", &[]).is_ok());
        assert!(RunConfig::parse("time.steps", &[]).is_err());
    }

    #[test]
    fn seed_override_is_echoed() {
        let c = RunConfig::parse("", &[]).unwrap().with_seed(7).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.echo().contains("noise.seed = 7\n"));
    }
}
