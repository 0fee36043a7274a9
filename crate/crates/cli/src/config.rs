use crate::error::CliError;
use clap::ValueEnum;
use rfwave_core::cauchy_solver::SolverConfig;
use rfwave_core::field_grid::{make_grid, Grid};
use rfwave_core::nonlinearity::Bistable;
use rfwave_core::riesz_feller::RFParams;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Prefix for environment overrides: `RFWAVE_ALPHA=1.7` replaces `alpha`.
pub const ENV_PREFIX: &str = "RFWAVE_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Kernel,
    Opcheck,
    Evolve,
    Wave,
    Sweep,
    Certify,
    Stability,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Kernel => "kernel",
            Operation::Opcheck => "opcheck",
            Operation::Evolve => "evolve",
            Operation::Wave => "wave",
            Operation::Sweep => "sweep",
            Operation::Certify => "certify",
            Operation::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reaction {
    Cubic,
    Quintic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initial {
    Zeta,
    Tanh,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    None,
    Bump,
    Translate,
}

/// A scalar, or an inline list that a sweep expands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    One(f64),
    Many(Vec<f64>),
}

impl Values {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            Values::One(v) => std::slice::from_ref(v),
            Values::Many(v) => v,
        }
    }

    fn single(&self, key: &str) -> Result<f64, CliError> {
        match self.as_slice() {
            [v] => Ok(*v),
            _ => Err(CliError::Config(format!("{key} takes a single value outside a sweep"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    operation: Option<Operation>,
    alpha: Option<Values>,
    theta: Option<Values>,
    a: Option<Values>,
    nonlinearity: Option<Reaction>,
    half_width: Option<f64>,
    points: Option<usize>,
    dt: Option<f64>,
    t_final: Option<f64>,
    snapshot_every: Option<f64>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    initial: Option<Initial>,
    kernel_stride: Option<usize>,
    delta_a: Option<f64>,
    delta_b: Option<f64>,
    perturbation: Option<Perturbation>,
    amplitude: Option<f64>,
    bump_center: Option<f64>,
    shift: Option<f64>,
    stability_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub operation: Operation,
    pub alpha: Values,
    pub theta: Values,
    pub a: Values,
    pub nonlinearity: Reaction,
    pub half_width: f64,
    pub points: usize,
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    pub out: PathBuf,
    pub seed: u64,
    pub initial: Initial,
    pub kernel_stride: usize,
    /// None selects delta_* / 2.
    pub delta_a: Option<f64>,
    pub delta_b: f64,
    pub perturbation: Perturbation,
    pub amplitude: f64,
    pub bump_center: f64,
    pub shift: f64,
    pub stability_t: f64,
}

impl ExperimentConfig {
    pub fn params(&self) -> Result<RFParams, CliError> {
        Ok(RFParams::new(self.alpha.single("alpha")?, self.theta.single("theta")?)?)
    }

    pub fn reaction(&self) -> Result<Bistable, CliError> {
        make_reaction(self.nonlinearity, self.a.single("a")?)
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        Ok(make_grid(self.half_width, self.points)?)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig::new(self.dt, self.t_final)
    }

    /// One wave run per (alpha, theta, a), in that nesting order.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &alpha in self.alpha.as_slice() {
            for &theta in self.theta.as_slice() {
                for &a in self.a.as_slice() {
                    let mut c = self.clone();
                    c.operation = Operation::Wave;
                    c.alpha = Values::One(alpha);
                    c.theta = Values::One(theta);
                    c.a = Values::One(a);
                    c.out = self.out.join(format!("alpha{alpha}_theta{theta}_a{a}"));
                    out.push(c);
                }
            }
        }
        out
    }
}

fn make_reaction(kind: Reaction, a: f64) -> Result<Bistable, CliError> {
    Ok(match kind {
        Reaction::Cubic => Bistable::cubic(a)?,
        Reaction::Quintic => Bistable::quintic(a)?,
    })
}

/// Parses a TOML value, falling back to a bare string (`RFWAVE_OUT=runs/a`).
fn override_value(text: &str) -> toml::Value {
    match format!("v = {text}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

/// `RFWAVE_*` pairs from the given environment, keys lowercased and prefix stripped.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|k| (k.to_ascii_lowercase(), v)))
        .collect();
    out.sort();
    out
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_config_with(text, &[])
}

/// Later overrides win. Unknown keys, from the file or an override, are errors.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let mut table: toml::Table = text.parse()?;
    for (k, v) in overrides {
        table.insert(k.clone(), override_value(v));
    }
    let raw: RawConfig = table.try_into()?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig, CliError> {
    let operation = raw.operation.ok_or_else(|| CliError::Config("missing key: operation".into()))?;
    let alpha = raw.alpha.ok_or_else(|| CliError::Config("missing key: alpha".into()))?;
    let theta = raw.theta.unwrap_or(Values::One(0.0));
    let a = raw.a.unwrap_or(Values::One(0.3));
    let nonlinearity = raw.nonlinearity.unwrap_or(Reaction::Cubic);
    for v in [&alpha, &theta, &a] {
        if v.as_slice().is_empty() {
            return Err(CliError::Config("empty value list".into()));
        }
    }
    if operation != Operation::Sweep {
        alpha.single("alpha")?;
        theta.single("theta")?;
        a.single("a")?;
    }
    for &al in alpha.as_slice() {
        for &th in theta.as_slice() {
            let p = RFParams::new(al, th)?;
            if operation != Operation::Kernel {
                p.require_wave_regime()?;
            }
        }
    }
    for &v in a.as_slice() {
        make_reaction(nonlinearity, v)?;
    }

    // Heavy tails need a longer domain at the same resolution.
    let heavy = alpha.as_slice().iter().any(|&v| v <= 1.3);
    let half_width = raw.half_width.unwrap_or(if heavy { 160.0 } else { 80.0 });
    let points = raw.points.unwrap_or(if heavy { 16384 } else { 8192 });
    make_grid(half_width, points)?;
    let dt = raw.dt.unwrap_or(5e-3);
    let t_final = raw.t_final.unwrap_or(40.0);
    SolverConfig::new(dt, t_final).validate()?;
    let snapshot_every = raw.snapshot_every.unwrap_or(1.0);
    if !(snapshot_every >= dt) {
        return Err(CliError::Config(format!("snapshot_every = {snapshot_every} must be at least dt = {dt}")));
    }
    let positive = |key: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Config(format!("{key} must be positive, got {v}")))
        }
    };
    let delta_a = raw.delta_a.map(|d| positive("delta_a", d)).transpose()?;
    let delta_b = positive("delta_b", raw.delta_b.unwrap_or(0.1))?;
    let stability_t = positive("stability_t", raw.stability_t.unwrap_or(20.0))?;
    let kernel_stride = raw.kernel_stride.unwrap_or(16);
    if kernel_stride == 0 {
        return Err(CliError::Config("kernel_stride must be at least 1".into()));
    }
    Ok(ExperimentConfig {
        operation,
        alpha,
        theta,
        a,
        nonlinearity,
        half_width,
        points,
        dt,
        t_final,
        snapshot_every,
        out: raw.out.unwrap_or_else(|| PathBuf::from("runs").join(operation.name())),
        seed: raw.seed.unwrap_or(0),
        initial: raw.initial.unwrap_or(Initial::Zeta),
        kernel_stride,
        delta_a,
        delta_b,
        perturbation: raw.perturbation.unwrap_or(Perturbation::Bump),
        amplitude: raw.amplitude.unwrap_or(0.05),
        bump_center: raw.bump_center.unwrap_or(3.0),
        shift: raw.shift.unwrap_or(0.5),
        stability_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_wave_config_fills_defaults() {
        let c = parse_config("operation = \"wave\"\nalpha = 1.5\ntheta = 0\na = 0.3\n").unwrap();
        assert_eq!((c.half_width, c.points, c.dt, c.t_final), (80.0, 8192, 5e-3, 40.0));
        assert_eq!(c.out, PathBuf::from("runs/wave"));
        assert_eq!(c.delta_b, 0.1);
    }

    #[test]
    fn inadmissible_skew_cites_the_inequality() {
        let e = parse_config("operation = \"wave\"\nalpha = 1.5\ntheta = 0.7\n").unwrap_err().to_string();
        assert!(e.contains("min(alpha, 2 - alpha) = 0.5"), "{e}");
    }

    #[test]
    fn kernel_path_accepts_alpha_one() {
        let c = parse_config("operation = \"kernel\"\nalpha = 1.0\ntheta = 0.99\n").unwrap();
        assert_eq!(c.params().unwrap().theta(), 0.99);
        assert!(parse_config("operation = \"wave\"\nalpha = 1.0\n").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config("operation = \"wave\"\nalpha = 1.5\nalhpa = 2\n").unwrap_err().to_string();
        assert!(e.contains("alhpa"), "{e}");
        let o = vec![("bogus".to_string(), "1".to_string())];
        assert!(parse_config_with("operation = \"wave\"\nalpha = 1.5\n", &o).is_err());
    }

    #[test]
    fn lists_only_in_sweeps() {
        assert!(parse_config("operation = \"wave\"\nalpha = [1.5, 2.0]\n").is_err());
        let c = parse_config("operation = \"sweep\"\nalpha = [1.5, 2.0]\na = [0.3, 0.4, 0.5]\n").unwrap();
        let kids = c.expand();
        assert_eq!(kids.len(), 6);
        assert!(kids.iter().all(|k| k.operation == Operation::Wave && k.out.starts_with("runs/sweep")));
        assert_eq!(kids[5].out, PathBuf::from("runs/sweep/alpha2_theta0_a0.5"));
    }

    #[test]
    fn overrides_parse_as_toml_or_strings() {
        let env = env_overrides(vec![
            ("RFWAVE_ALPHA".to_string(), "1.7".to_string()),
            ("RFWAVE_OUT".to_string(), "runs/x".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ]);
        assert_eq!(env.len(), 2);
        let c = parse_config_with("operation = \"wave\"\nalpha = 1.5\n", &env).unwrap();
        assert_eq!(c.alpha, Values::One(1.7));
        assert_eq!(c.out, PathBuf::from("runs/x"));
    }

    #[test]
    fn heavy_tails_double_the_domain() {
        let c = parse_config("operation = \"wave\"\nalpha = 1.25\n").unwrap();
        assert_eq!((c.half_width, c.points), (160.0, 16384));
    }
}
