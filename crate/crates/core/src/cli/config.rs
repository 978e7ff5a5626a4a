//! `key = value` run configuration with experiment presets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::assembly::PhysicalParams;
use crate::huber::RegularizationParams;
use crate::mesh::{build_cross_grid, Mesh};
use crate::stepper::{MultiplierCoupling, TimeGrid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta0Mode {
    /// Solve the elliptic initial-temperature problem.
    Elliptic,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Experiment1,
    Experiment2,
    /// Experiment 1 with weak boundary exchange (`β = 1`), the base of the
    /// heat-sink sweep.
    AlphaSweep,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Experiment1, Preset::Experiment2, Preset::AlphaSweep];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Experiment1 => "experiment1",
            Preset::Experiment2 => "experiment2",
            Preset::AlphaSweep => "alpha_sweep",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh_nx: usize,
    pub mesh_ny: usize,
    pub physical: PhysicalParams,
    pub reg: RegularizationParams,
    /// `C` in `δt = C h^{4/5}`.
    pub dt_constant: f64,
    pub tf: f64,
    pub theta0_mode: Theta0Mode,
    /// Levels between snapshots; `None` picks about ten per run.
    pub snapshot_every: Option<usize>,
    pub output_dir: PathBuf,
    pub report_q: f64,
    pub sample_times: Vec<f64>,
    pub ssn_tol: f64,
    pub ssn_max_iter: usize,
    pub coupling: MultiplierCoupling,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let exp1 = Self {
            mesh_nx: 24,
            mesh_ny: 24,
            physical: PhysicalParams {
                mu0: 1.0,
                delta_mu: 0.5,
                g0: 10.0,
                delta_g: 8.0,
                kappa: 10.0,
                cp: 1.0,
                alpha: 100.0,
                beta: 15.0,
            },
            reg: RegularizationParams { gamma: 1e3 },
            dt_constant: 0.1,
            tf: 0.12,
            theta0_mode: Theta0Mode::Elliptic,
            snapshot_every: None,
            output_dir: PathBuf::from("output"),
            report_q: 1.5,
            sample_times: vec![0.015, 0.03, 0.06, 0.12],
            ssn_tol: crate::ssn::default_tolerance(),
            ssn_max_iter: crate::ssn::DEFAULT_MAX_ITER,
            coupling: MultiplierCoupling::Unweighted,
        };
        match preset {
            Preset::Experiment1 => exp1,
            Preset::Experiment2 => Self {
                physical: PhysicalParams {
                    mu0: 1.5,
                    delta_mu: -0.5,
                    g0: 18.0,
                    delta_g: -8.0,
                    kappa: 10.0,
                    cp: 1.5,
                    alpha: 0.0,
                    beta: 15.0,
                },
                theta0_mode: Theta0Mode::Constant(0.0125),
                ..exp1
            },
            Preset::AlphaSweep => Self { physical: PhysicalParams { beta: 1.0, ..exp1.physical }, ..exp1 },
        }
    }

    pub fn mesh(&self) -> Result<Mesh, ConfigError> {
        build_cross_grid(self.mesh_nx, self.mesh_ny, 1.0, 1.0).map_err(|e| ConfigError::Validation(e.to_string()))
    }

    /// Mesh size of the configured grid (diameter of the largest triangle).
    pub fn h(&self) -> Result<f64, ConfigError> {
        Ok(self.mesh()?.h)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        TimeGrid::from_rule(self.h()?, self.dt_constant, self.tf).map_err(|e| ConfigError::Validation(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Validation(msg));
        if self.mesh_nx == 0 || self.mesh_ny == 0 {
            return fail(format!("mesh_nx and mesh_ny must be at least 1 (got {}, {})", self.mesh_nx, self.mesh_ny));
        }
        self.physical.validate().map_err(|e| ConfigError::Validation(e.to_string()))?;
        if !(self.reg.gamma > 0.0 && self.reg.gamma.is_finite()) {
            return fail(format!("gamma must be positive (got {})", self.reg.gamma));
        }
        if !(self.dt_constant > 0.0 && self.dt_constant.is_finite()) {
            return fail(format!("dt_constant must be positive (got {})", self.dt_constant));
        }
        if !(self.tf > 0.0 && self.tf.is_finite()) {
            return fail(format!("tf must be positive (got {})", self.tf));
        }
        if let Theta0Mode::Constant(v) = self.theta0_mode {
            if !v.is_finite() {
                return fail(format!("theta0 must be finite (got {v})"));
            }
        }
        if self.theta0_mode == Theta0Mode::Elliptic && !(self.physical.beta > 0.0) {
            return fail("elliptic theta0 needs beta > 0 (pure Neumann problem is singular)".into());
        }
        if self.snapshot_every == Some(0) {
            return fail("snapshot_every must be at least 1".into());
        }
        if !(self.report_q > 1.0 && self.report_q <= 2.0) {
            return fail(format!("report_q must lie in (1, 2] (got {})", self.report_q));
        }
        if let Some(t) = self.sample_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return fail(format!("sample_times must be non-negative (got {t})"));
        }
        if !(self.ssn_tol > 0.0) {
            return fail(format!("ssn_tol must be positive (got {})", self.ssn_tol));
        }
        if self.ssn_max_iter == 0 {
            return fail("ssn_max_iter must be at least 1".into());
        }
        let grid = self.time_grid()?;
        if grid.dt > self.dt_constant * self.h()?.powf(0.8) * (1.0 + 1e-12) {
            return fail("dt exceeds C h^(4/5)".into());
        }
        Ok(())
    }

    /// Resolved configuration in the input syntax, derived quantities as
    /// comments. Parsing the output gives back `self`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let p = &self.physical;
        if let (Ok(h), Ok(grid)) = (self.h(), self.time_grid()) {
            let _ = writeln!(s, "# h = {h:?}");
            let _ = writeln!(s, "# dt = {:?}", grid.dt);
            let _ = writeln!(s, "# n_steps = {}", grid.n_steps);
            let _ = writeln!(s, "# final time = {:?}", grid.final_time());
            if self.snapshot_every.is_none() {
                let _ = writeln!(s, "# snapshot levels = {:?}", super::output::snapshot_levels(self, &grid));
            }
        }
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mesh_nx", self.mesh_nx.to_string());
        kv("mesh_ny", self.mesh_ny.to_string());
        kv("mu0", format!("{:?}", p.mu0));
        kv("delta_mu", format!("{:?}", p.delta_mu));
        kv("g0", format!("{:?}", p.g0));
        kv("delta_g", format!("{:?}", p.delta_g));
        kv("kappa", format!("{:?}", p.kappa));
        kv("cp", format!("{:?}", p.cp));
        kv("alpha", format!("{:?}", p.alpha));
        kv("beta", format!("{:?}", p.beta));
        kv("gamma", format!("{:?}", self.reg.gamma));
        kv("dt_constant", format!("{:?}", self.dt_constant));
        kv("tf", format!("{:?}", self.tf));
        kv(
            "theta0",
            match self.theta0_mode {
                Theta0Mode::Elliptic => "elliptic".into(),
                Theta0Mode::Constant(v) => format!("{v:?}"),
            },
        );
        kv("snapshot_every", self.snapshot_every.map_or_else(|| "auto".into(), |k| k.to_string()));
        kv("output_dir", self.output_dir.display().to_string());
        kv("report_q", format!("{:?}", self.report_q));
        kv("sample_times", self.sample_times.iter().map(|t| format!("{t:?}")).collect::<Vec<_>>().join(", "));
        kv("ssn_tol", format!("{:?}", self.ssn_tol));
        kv("ssn_max_iter", self.ssn_max_iter.to_string());
        kv(
            "multiplier_coupling",
            match self.coupling {
                MultiplierCoupling::Unweighted => "unweighted".into(),
                MultiplierCoupling::YieldWeighted => "yield_weighted".into(),
            },
        );
        s
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>().map_err(|_| ConfigError::Parse { line, message: format!("{key}: expected a number, got '{v}'") })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError::Parse { line, message: format!("{key}: expected a non-negative integer, got '{v}'") })
}

/// Parses and validates a configuration.
///
/// A `preset` line, when present, supplies the base values and must come
/// before any other key; without it the base is `experiment1`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::preset(Preset::Experiment1);
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected 'key = value', got '{content}'") })?;
        if seen.iter().any(|k| k == key) {
            return Err(ConfigError::Parse { line, message: format!("duplicate key '{key}'") });
        }
        if value.is_empty() && key != "sample_times" {
            return Err(ConfigError::Parse { line, message: format!("{key}: missing value") });
        }
        let p = &mut cfg.physical;
        match key {
            "preset" => {
                if !seen.is_empty() {
                    return Err(ConfigError::Parse { line, message: "preset must precede all other keys".into() });
                }
                let preset = Preset::from_name(value)
                    .ok_or_else(|| ConfigError::Parse { line, message: format!("unknown preset '{value}'") })?;
                cfg = RunConfig::preset(preset);
            }
            "mesh_nx" => cfg.mesh_nx = parse_usize(line, key, value)?,
            "mesh_ny" => cfg.mesh_ny = parse_usize(line, key, value)?,
            "mu0" => p.mu0 = parse_f64(line, key, value)?,
            "delta_mu" => p.delta_mu = parse_f64(line, key, value)?,
            "g0" => p.g0 = parse_f64(line, key, value)?,
            "delta_g" => p.delta_g = parse_f64(line, key, value)?,
            "kappa" => p.kappa = parse_f64(line, key, value)?,
            "cp" => p.cp = parse_f64(line, key, value)?,
            "alpha" => p.alpha = parse_f64(line, key, value)?,
            "beta" => p.beta = parse_f64(line, key, value)?,
            "gamma" => cfg.reg.gamma = parse_f64(line, key, value)?,
            "dt_constant" => cfg.dt_constant = parse_f64(line, key, value)?,
            "tf" => cfg.tf = parse_f64(line, key, value)?,
            "theta0" => {
                cfg.theta0_mode = match value {
                    "elliptic" => Theta0Mode::Elliptic,
                    v => Theta0Mode::Constant(parse_f64(line, key, v)?),
                }
            }
            "snapshot_every" => {
                cfg.snapshot_every = match value {
                    "auto" => None,
                    v => Some(parse_usize(line, key, v)?),
                }
            }
            "output_dir" => cfg.output_dir = PathBuf::from(value),
            "report_q" => cfg.report_q = parse_f64(line, key, value)?,
            "sample_times" => {
                cfg.sample_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| parse_f64(line, key, v))
                    .collect::<Result<_, _>>()?
            }
            "ssn_tol" => cfg.ssn_tol = parse_f64(line, key, value)?,
            "ssn_max_iter" => cfg.ssn_max_iter = parse_usize(line, key, value)?,
            "multiplier_coupling" => {
                cfg.coupling = match value {
                    "unweighted" => MultiplierCoupling::Unweighted,
                    "yield_weighted" => MultiplierCoupling::YieldWeighted,
                    v => {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("multiplier_coupling: expected 'unweighted' or 'yield_weighted', got '{v}'"),
                        })
                    }
                }
            }
            other => return Err(ConfigError::Parse { line, message: format!("unknown key '{other}'") }),
        }
        seen.push(key.to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `source` as a file, or as a preset name when no such file exists.
pub fn load_config(source: &Path) -> Result<RunConfig, ConfigError> {
    if !source.exists() {
        if let Some(preset) = source.to_str().and_then(|s| Preset::from_name(s.trim_end_matches(".cfg"))) {
            let cfg = RunConfig::preset(preset);
            cfg.validate()?;
            return Ok(cfg);
        }
    }
    let text =
        std::fs::read_to_string(source).map_err(|e| ConfigError::Io { path: source.to_path_buf(), source: e })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_experiments() {
        let c = parse_config("preset = experiment1").unwrap();
        let p = c.physical;
        assert_eq!((p.mu0, p.delta_mu, p.g0, p.delta_g), (1.0, 0.5, 10.0, 8.0));
        assert_eq!((p.alpha, p.beta, p.kappa, p.cp), (100.0, 15.0, 10.0, 1.0));
        assert_eq!((c.reg.gamma, c.dt_constant, c.tf), (1e3, 0.1, 0.12));
        assert_eq!(c.theta0_mode, Theta0Mode::Elliptic);

        let c = parse_config("preset = experiment2\n").unwrap();
        let p = c.physical;
        assert_eq!((p.mu0, p.delta_mu, p.g0, p.delta_g), (1.5, -0.5, 18.0, -8.0));
        assert_eq!((p.alpha, p.beta, p.kappa, p.cp), (0.0, 15.0, 10.0, 1.5));
        assert_eq!((c.reg.gamma, c.tf), (1e3, 0.12));
        assert_eq!(c.theta0_mode, Theta0Mode::Constant(0.0125));
    }

    #[test]
    fn negative_viscosity_rejected() {
        assert!(matches!(parse_config("mu0 = -1"), Err(ConfigError::Validation(_))));
        // μ(1) = 1 − 2 < 0
        assert!(matches!(parse_config("delta_mu = -2"), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_config("# comment\nmesh_nx = 8\nbogus = 1\n") {
            Err(ConfigError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("mesh_nx 8"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("gamma = abc"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("tf = 1\ntf = 2"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("tf = 1\npreset = experiment2"), Err(ConfigError::Parse { line: 2, .. })));
    }

    #[test]
    fn overrides_and_comments() {
        let c = parse_config("preset = experiment2 # base\nmesh_nx = 6\nmesh_ny = 4\nsnapshot_every = 3\nsample_times = 0.01, 0.02")
            .unwrap();
        assert_eq!((c.mesh_nx, c.mesh_ny, c.snapshot_every), (6, 4, Some(3)));
        assert_eq!(c.sample_times, vec![0.01, 0.02]);
        assert_eq!(c.physical.g0, 18.0);
    }

    #[test]
    fn echo_round_trips() {
        for preset in Preset::ALL {
            let c = RunConfig::preset(preset);
            let again = parse_config(&c.echo()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.echo(), c.echo());
        }
        let mut c = RunConfig::preset(Preset::Experiment1);
        c.physical.alpha = 0.1 + 0.2;
        c.snapshot_every = Some(2);
        c.coupling = MultiplierCoupling::YieldWeighted;
        c.theta0_mode = Theta0Mode::Constant(1.0 / 3.0);
        assert_eq!(parse_config(&c.echo()).unwrap(), c);
    }

    #[test]
    fn echo_reports_derived_step() {
        let c = RunConfig::preset(Preset::Experiment1);
        let grid = c.time_grid().unwrap();
        let echo = c.echo();
        assert!(echo.contains(&format!("# dt = {:?}", grid.dt)));
        assert!(echo.contains(&format!("# n_steps = {}", grid.n_steps)));
        assert!(grid.n_steps as f64 * grid.dt >= c.tf - grid.dt / 2.0);
    }
}
