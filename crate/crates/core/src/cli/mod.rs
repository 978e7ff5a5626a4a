//! Command-line front end: `run`, `theta0` and `sweep`.

pub mod config;
pub mod output;
pub mod vtk;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::assembly::viscosity_on_triangles;
use crate::huber::{self, RegularizationParams};
use crate::postprocess::{table1_report, PostprocessError, Table1};
use crate::stepper::{self, Forcing, RunResult, Simulation, SolverSettings, StepError};

pub use config::{load_config, parse_config, ConfigError, Preset, RunConfig, Theta0Mode};
use output::{snapshot_levels, RunWriter};
use vtk::{write_snapshot, SnapshotFields, VtkError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Vtk(#[from] VtkError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "bingham", version, about = "Non-isothermal Bingham flow in the unit square")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full time integration.
    Run(CommonArgs),
    /// Solve and write the initial temperature only.
    Theta0(CommonArgs),
    /// One run per heat-sink coefficient, plus a summary table.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated values of alpha.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Configuration file or preset name (experiment1, experiment2, alpha_sweep).
    pub config_path: Option<PathBuf>,
    /// Same as the positional argument.
    #[arg(long = "config", conflicts_with = "config_path")]
    pub config_flag: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Quads per side (sets mesh_nx = mesh_ny).
    #[arg(long)]
    pub mesh_n: Option<usize>,
    /// Huber regularization parameter.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Snapshot cadence in time levels.
    #[arg(long)]
    pub snapshot_every: Option<usize>,
}

impl CommonArgs {
    /// Loads the configuration and applies command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let source = self
            .config_path
            .as_ref()
            .or(self.config_flag.as_ref())
            .ok_or_else(|| CliError::Usage("no configuration given (file path or preset name)".into()))?;
        let mut cfg = load_config(source)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = dir.clone();
        }
        if let Some(n) = self.mesh_n {
            cfg.mesh_nx = n;
            cfg.mesh_ny = n;
        }
        if let Some(g) = self.gamma {
            cfg.reg = RegularizationParams { gamma: g };
        }
        if self.snapshot_every.is_some() {
            cfg.snapshot_every = self.snapshot_every;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Simulation and initial data for a configuration (flow starts at rest).
pub fn prepare(cfg: &RunConfig) -> Result<(Simulation, Vec<f64>, Vec<f64>), CliError> {
    let mesh = cfg.mesh()?;
    let grid = cfg.time_grid()?;
    let forcing = Forcing::experiments(&mesh);
    let settings = SolverSettings {
        tol: cfg.ssn_tol,
        max_iter: cfg.ssn_max_iter,
        q_exponent: cfg.report_q,
        coupling: cfg.coupling,
    };
    let sim = Simulation::new(mesh, cfg.physical, cfg.reg, grid, settings, forcing)?;
    let theta0 = initial_temperature(cfg, &sim)?;
    let u0 = vec![0.0; sim.n_velocity()];
    Ok((sim, u0, theta0))
}

pub fn initial_temperature(cfg: &RunConfig, sim: &Simulation) -> Result<Vec<f64>, CliError> {
    Ok(match cfg.theta0_mode {
        Theta0Mode::Elliptic => stepper::solve_theta0(&sim.mesh, &sim.ops, &sim.params, stepper::theta0_source)?,
        Theta0Mode::Constant(v) => vec![v; sim.mesh.n_nodes()],
    })
}

fn write_echo(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let path = cfg.output_dir.join("config.echo");
    std::fs::write(&path, cfg.echo()).map_err(io_err(&path))
}

#[derive(Debug)]
pub struct RunOutcome {
    pub result: RunResult,
    /// Rows for the configured sample times the run reached.
    pub table: Option<Table1>,
}

/// Runs `cfg` and fills its output directory.
pub fn command_run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    write_echo(cfg)?;
    let (sim, u0, theta0) = prepare(cfg)?;
    let levels = snapshot_levels(cfg, &sim.grid);
    let mut writer = RunWriter::create(&cfg.output_dir, &sim.mesh, &levels)?;
    let g0 = huber::yield_on_triangles(&sim.mesh, &theta0, &sim.params).map_err(StepError::from)?;
    let mu0 = viscosity_on_triangles(&sim.mesh, &theta0, &sim.params).map_err(StepError::from)?;
    let initial_mask = huber::active_mask(&sim.ops.e, &u0, &g0, &sim.reg);
    writer.write_snapshot(
        0,
        &SnapshotFields {
            velocity: Some(&u0),
            temperature: &theta0,
            pressure: Some(&vec![0.0; sim.mesh.n_quads()]),
            active: Some(&initial_mask),
            g_t: Some(&g0),
            mu_t: Some(&mu0),
        },
    )?;
    let result = stepper::run(&sim, &u0, &theta0, &mut writer)?;
    let reached = result.grid.final_time() + 0.5 * result.grid.dt;
    let times: Vec<f64> = cfg.sample_times.iter().copied().filter(|&t| t <= reached).collect();
    let table = if times.is_empty() { None } else { Some(table1_report(&result.ssn_log, &times)?) };
    if let Some(table) = &table {
        let path = cfg.output_dir.join("ssn_table.txt");
        std::fs::write(&path, table.to_string()).map_err(io_err(&path))?;
    }
    Ok(RunOutcome { result, table })
}

/// Writes `theta0.vtk` with the initial temperature; returns its path.
pub fn command_theta0(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    write_echo(cfg)?;
    let mesh = cfg.mesh()?;
    let grid = cfg.time_grid()?;
    let sim = Simulation::new(mesh, cfg.physical, cfg.reg, grid, SolverSettings::default(), Forcing::none(&cfg.mesh()?))?;
    let theta0 = initial_temperature(cfg, &sim)?;
    let path = cfg.output_dir.join("theta0.vtk");
    let fields =
        SnapshotFields { velocity: None, temperature: &theta0, pressure: None, active: None, g_t: None, mu_t: None };
    write_snapshot(&fields, &sim.mesh, &path)?;
    Ok(path)
}

pub const SWEEP_HEADER: &str = "alpha,output_dir,avg_ssn_iters,g_min,g_max,mu_min,mu_max,final_u_h1";

/// Extremes over all history records of one sweep member.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub output_dir: PathBuf,
    pub avg_ssn_iters: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub final_u_h1: f64,
}

impl SweepRow {
    pub fn from_result(alpha: f64, output_dir: PathBuf, result: &RunResult) -> Self {
        let h = &result.history;
        let fold = |f: fn(&crate::postprocess::HistoryRecord) -> f64, init: f64, op: fn(f64, f64) -> f64| {
            h.iter().map(f).fold(init, op)
        };
        Self {
            alpha,
            output_dir,
            avg_ssn_iters: result.average_ssn_iterations(),
            g_min: fold(|r| r.g_min, f64::INFINITY, f64::min),
            g_max: fold(|r| r.g_max, f64::NEG_INFINITY, f64::max),
            mu_min: fold(|r| r.mu_min, f64::INFINITY, f64::min),
            mu_max: fold(|r| r.mu_max, f64::NEG_INFINITY, f64::max),
            final_u_h1: h.last().map_or(0.0, |r| r.u_h1),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:?},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.alpha,
            self.output_dir.display(),
            self.avg_ssn_iters,
            self.g_min,
            self.g_max,
            self.mu_min,
            self.mu_max,
            self.final_u_h1
        )
    }
}

/// One run per `alpha`, each in `<output_dir>/alpha_<value>`, executed on
/// separate threads; writes `sweep_summary.csv` in the base directory.
pub fn command_sweep(base: &RunConfig, alphas: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if alphas.is_empty() {
        return Err(CliError::Usage("empty alpha list".into()));
    }
    let configs: Vec<RunConfig> = alphas
        .iter()
        .map(|&alpha| {
            let mut cfg = base.clone();
            cfg.physical.alpha = alpha;
            cfg.output_dir = base.output_dir.join(format!("alpha_{alpha}"));
            cfg.validate().map(|_| cfg)
        })
        .collect::<Result<_, _>>()?;
    std::fs::create_dir_all(&base.output_dir).map_err(io_err(&base.output_dir))?;
    let outcomes: Vec<Result<RunOutcome, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || command_run(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut rows = Vec::with_capacity(alphas.len());
    let mut first_error = None;
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        match outcome {
            Ok(o) => rows.push(SweepRow::from_result(cfg.physical.alpha, cfg.output_dir.clone(), &o.result)),
            Err(e) => {
                eprintln!("alpha = {}: {e}", cfg.physical.alpha);
                first_error.get_or_insert(e);
            }
        }
    }
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv_row());
    }
    let path = base.output_dir.join("sweep_summary.csv");
    std::fs::write(&path, csv).map_err(io_err(&path))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(rows),
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn execute<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let outcome = command_run(&cfg)?;
            println!(
                "{} records written to {}; average SSN iterations {:.2}",
                outcome.result.history.len(),
                cfg.output_dir.display(),
                outcome.result.average_ssn_iterations()
            );
            if let Some(table) = outcome.table {
                print!("{table}");
            }
        }
        Command::Theta0(args) => {
            let cfg = args.resolve()?;
            println!("{}", command_theta0(&cfg)?.display());
        }
        Command::Sweep { common, alpha } => {
            let cfg = common.resolve()?;
            let rows = command_sweep(&cfg, &alpha)?;
            println!("{SWEEP_HEADER}");
            for r in rows {
                println!("{}", r.csv_row());
            }
        }
    }
    Ok(())
}
