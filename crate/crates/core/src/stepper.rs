//! Semi-implicit BDF2 time loop coupling the flow and the energy equation.
//!
//! Each level `t_{k+2}` first solves the flow with material laws frozen at
//! `θ_{k+1}` and convection lagged through `Λ = 2u_{k+1} − u_k`, then the
//! energy equation with the fresh `u_{k+2}`. The first level comes from two
//! backward-Euler flow substeps (`t = 2δt/3, 4δt/3`, averaged) and one
//! backward-Euler energy step.

use thiserror::Error;

use crate::assembly::{
    assemble_constant_operators, assemble_convection_scalar, assemble_convection_vector, assemble_dissipation,
    body_force_vector, multiplier_coupling_from_triangles, pressure_constraints, scalar_load, viscosity_on_triangles,
    weighted_viscosity_from_triangles, AssembledOperators, AssemblyError, PhysicalParams,
};
use crate::huber::{self, ActiveMask, RegularizationParams};
use crate::linalg::{solve_spd, LinalgError, SparseMatrix};
use crate::mesh::Mesh;
use crate::postprocess::{HistoryRecord, PostprocessError, SsnLogStep};
use crate::ssn::{self, ssn_solve, FlowStepProblem, IncrementNorms, SsnError, SsnState};

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("flow solve at step {step} failed: {source}")]
    Ssn { step: usize, source: SsnError },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(
        "energy matrix at step {step} is not positive definite (pivot {pivot}); dissipation weights: \
         delta_mu * max|Eu|^2 = {m2_weight:e}, delta_g * max|Eu| = {m1_weight:e}; reduce delta_mu, delta_g or dt"
    )]
    EnergyNotDefinite { step: usize, pivot: usize, m2_weight: f64, m1_weight: f64 },
    #[error("elliptic initial temperature problem is singular (no Robin boundary exchange)")]
    SingularSystem,
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error("output: {0}")]
    Output(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub tf: f64,
    /// `C` in `δt = C h^{4/5}`, when the step came from that rule.
    pub dt_rule_constant: Option<f64>,
}

impl TimeGrid {
    /// `δt = C h^{4/5}`, `n_steps = ⌈T_f / δt⌉`.
    pub fn from_rule(h: f64, c: f64, tf: f64) -> Result<Self, StepError> {
        if !(h > 0.0 && c > 0.0 && tf > 0.0) {
            return Err(StepError::InvalidGrid(format!("h = {h}, C = {c}, Tf = {tf} must all be positive")));
        }
        let dt = c * h.powf(0.8);
        let n_steps = ((tf / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self { dt, n_steps, tf, dt_rule_constant: Some(c) })
    }

    pub fn fixed(dt: f64, n_steps: usize) -> Result<Self, StepError> {
        if !(dt > 0.0) || n_steps == 0 {
            return Err(StepError::InvalidGrid(format!("dt = {dt}, n_steps = {n_steps}")));
        }
        Ok(Self { dt, n_steps, tf: dt * n_steps as f64, dt_rule_constant: None })
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    /// Time actually reached: `n_steps · δt`.
    pub fn final_time(&self) -> f64 {
        self.time(self.n_steps)
    }
}

/// `2 curr − prev`.
pub fn lag(prev: &[f64], curr: &[f64]) -> Vec<f64> {
    assert_eq!(prev.len(), curr.len());
    prev.iter().zip(curr).map(|(p, c)| 2.0 * c - p).collect()
}

/// The two most recent levels of every field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldHistory {
    pub u_prev: Vec<f64>,
    pub u_curr: Vec<f64>,
    pub theta_prev: Vec<f64>,
    pub theta_curr: Vec<f64>,
    pub p_curr: Vec<f64>,
    pub q_curr: Vec<f64>,
}

impl FieldHistory {
    fn advance(&mut self, state: &SsnState, theta: Vec<f64>) {
        self.u_prev = std::mem::replace(&mut self.u_curr, state.u.clone());
        self.theta_prev = std::mem::replace(&mut self.theta_curr, theta);
        self.p_curr = state.p.clone();
        self.q_curr = state.q.clone();
    }
}

pub type LoadFn = Box<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Time-dependent load vectors of the momentum and energy equations.
pub struct Forcing {
    /// `∫ f(t)·φᵢ`, length `2n`.
    pub flow: LoadFn,
    /// Extra `∫ s(t) φᵢ` added to the energy right-hand side, length `n`.
    pub heat: Option<LoadFn>,
}

impl Forcing {
    /// The rotational body force of the experiments, no heat source.
    pub fn experiments(mesh: &Mesh) -> Self {
        let load = body_force_vector(mesh, 0.0);
        Self { flow: Box::new(move |_| load.clone()), heat: None }
    }

    pub fn none(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        Self { flow: Box::new(move |_| vec![0.0; 2 * n]), heat: None }
    }
}

/// How the multiplier enters the momentum equation.
///
/// The max relation bounds the multiplier by the yield stress, `N(q) ≤ G`.
/// `Unweighted` couples it through `Eᵀ diag(|T|)`, so the plastic stress is
/// `q` itself and the yield threshold is `g`. `YieldWeighted` couples through
/// `Q_g = Eᵀ diag(g_T |T|)`, which multiplies the bound once more and makes
/// the effective threshold `g²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierCoupling {
    #[default]
    Unweighted,
    YieldWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Exponent of the reported `W^{1,q}` temperature norm.
    pub q_exponent: f64,
    pub coupling: MultiplierCoupling,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: ssn::default_tolerance(),
            max_iter: ssn::DEFAULT_MAX_ITER,
            q_exponent: 1.5,
            coupling: MultiplierCoupling::default(),
        }
    }
}

/// Everything a run needs besides the initial data.
pub struct Simulation {
    pub mesh: Mesh,
    pub ops: AssembledOperators,
    pub params: PhysicalParams,
    pub reg: RegularizationParams,
    pub grid: TimeGrid,
    pub settings: SolverSettings,
    pub forcing: Forcing,
    pub pressure_constraints: Vec<Vec<f64>>,
    /// When false, θ stays at its initial value and only the flow advances.
    pub energy_enabled: bool,
    norms: IncrementNorms,
}

impl Simulation {
    pub fn new(
        mesh: Mesh,
        params: PhysicalParams,
        reg: RegularizationParams,
        grid: TimeGrid,
        settings: SolverSettings,
        forcing: Forcing,
    ) -> Result<Self, StepError> {
        params.validate()?;
        let ops = assemble_constant_operators(&mesh);
        let norms =
            IncrementNorms { h1: ops.h1_matrix(), quad_area: mesh.quad_area.clone(), tri_area: mesh.tri_area.clone() };
        Ok(Self {
            pressure_constraints: pressure_constraints(&mesh),
            mesh,
            ops,
            params,
            reg,
            grid,
            settings,
            forcing,
            energy_enabled: true,
            norms,
        })
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.mesh.n_nodes()
    }

    pub fn zero_state(&self) -> SsnState {
        SsnState::zeros(self.n_velocity(), self.mesh.n_quads(), 4 * self.mesh.n_triangles())
    }

    /// Flow problem with `Ξ = mass_coeff · M + A_μ(θ)` and laws frozen at `θ`.
    pub fn flow_problem(&self, theta: &[f64], mass_coeff: f64, rhs: Vec<f64>) -> Result<FlowStepProblem, StepError> {
        let mu = viscosity_on_triangles(&self.mesh, theta, &self.params)?;
        let g = huber::yield_on_triangles(&self.mesh, theta, &self.params)?;
        let a_mu = weighted_viscosity_from_triangles(&self.mesh, &self.ops, &mu);
        let q_g = match self.settings.coupling {
            MultiplierCoupling::Unweighted => {
                multiplier_coupling_from_triangles(&self.mesh, &self.ops, &vec![1.0; g.len()])
            }
            MultiplierCoupling::YieldWeighted => multiplier_coupling_from_triangles(&self.mesh, &self.ops, &g),
        };
        Ok(FlowStepProblem {
            xi: self.ops.m_vec.add_scaled(mass_coeff, &a_mu, 1.0),
            b: self.ops.b.clone(),
            q_g,
            e: self.ops.e.clone(),
            g_t: g,
            f: rhs,
            reg: self.reg,
            fixed: self.ops.velocity_fixed.clone(),
            pressure_constraints: self.pressure_constraints.clone(),
            norms: self.norms.clone(),
        })
    }

    fn solve_flow(&self, step: usize, problem: &FlowStepProblem, init: SsnState) -> Result<SsnState, StepError> {
        ssn_solve(problem, init, self.settings.tol, self.settings.max_iter).map_err(|source| StepError::Ssn { step, source })
    }

    fn heat_load(&self, t: f64) -> Option<Vec<f64>> {
        self.forcing.heat.as_ref().map(|h| h(t))
    }

    /// `mass_coeff · Cp M + κA + αM + Cp β M_Γ − δμ M₂(u) − δg M₁(u)` and the
    /// dissipation source `μ₀ Θ₂(u) + g₀ Θ₁(u)`.
    fn energy_system(&self, u: &[f64], mass_coeff: f64) -> (SparseMatrix, Vec<f64>, f64, f64) {
        let p = &self.params;
        let diss = assemble_dissipation(&self.mesh, &self.ops, u);
        let matrix = SparseMatrix::linear_combination(&[
            (mass_coeff * p.cp + p.alpha, &self.ops.m_sca),
            (p.kappa, &self.ops.a_sca),
            (p.cp * p.beta, &self.ops.m_gamma),
            (-p.delta_mu, &diss.m2),
            (-p.delta_g, &diss.m1),
        ]);
        let source: Vec<f64> = diss.th2.iter().zip(&diss.th1).map(|(a, b)| p.mu0 * a + p.g0 * b).collect();
        let max_strain = crate::assembly::strain_norms(&self.ops, u).into_iter().fold(0.0, f64::max);
        (matrix, source, p.delta_mu * max_strain * max_strain, p.delta_g * max_strain)
    }

    fn solve_energy(&self, step: usize, u: &[f64], mass_coeff: f64, rhs: Vec<f64>) -> Result<Vec<f64>, StepError> {
        let (matrix, source, m2_weight, m1_weight) = self.energy_system(u, mass_coeff);
        let rhs: Vec<f64> = rhs.iter().zip(&source).map(|(a, b)| a + b).collect();
        solve_spd(&matrix, &rhs).map_err(|e| match e {
            LinalgError::NonPositivePivot { index } => {
                StepError::EnergyNotDefinite { step, pivot: index, m2_weight, m1_weight }
            }
            other => StepError::Linalg(other),
        })
    }
}

/// Source of the elliptic initial temperature.
pub fn theta0_source(x: [f64; 2]) -> f64 {
    x[0] * x[0] / 100.0 + x[1] * x[1] / 50.0 + 1.0 / 100.0
}

/// `−Δθ₀ = s` with `κ ∂ₙθ₀ + Cp β θ₀ = 0` on Γ and homogeneous Neumann
/// elsewhere: `(κA + Cp β M_Γ) θ₀ = κ ∫ s φ`.
pub fn solve_theta0<F: Fn([f64; 2]) -> f64>(
    mesh: &Mesh,
    ops: &AssembledOperators,
    params: &PhysicalParams,
    source: F,
) -> Result<Vec<f64>, StepError> {
    if !(params.kappa > 0.0) {
        return Err(StepError::Assembly(AssemblyError::InvalidParameter("kappa must be positive".into())));
    }
    if !(params.beta * params.cp > 0.0) || mesh.boundary_edges_gamma.is_empty() {
        return Err(StepError::SingularSystem);
    }
    let matrix = ops.a_sca.add_scaled(params.kappa, &ops.m_gamma, params.cp * params.beta);
    let rhs: Vec<f64> = scalar_load(mesh, source).into_iter().map(|v| params.kappa * v).collect();
    solve_spd(&matrix, &rhs).map_err(|e| match e {
        LinalgError::NonPositivePivot { .. } | LinalgError::SingularSystem => StepError::SingularSystem,
        other => StepError::Linalg(other),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// One of the two backward-Euler flow substeps at `2δt/3`, `4δt/3`.
    InitSubstep,
    /// A full time level `t_k`.
    Level,
}

/// Fields available when a history record is emitted.
#[derive(Debug, Clone, Copy)]
pub struct StepReport<'a> {
    pub kind: RecordKind,
    pub step: usize,
    pub t: f64,
    pub residual_history: &'a [f64],
    pub u: &'a [f64],
    pub p: &'a [f64],
    pub q: &'a [f64],
    pub theta: &'a [f64],
    /// `μ_T` and `g_T` at the reported `θ`.
    pub mu_t: &'a [f64],
    pub g_t: &'a [f64],
    pub mask: &'a ActiveMask,
    /// The scalar diagnostics appended to the history.
    pub record: &'a HistoryRecord,
}

/// Hooks into the time loop; every method defaults to a no-op.
pub trait StepObserver {
    /// Called before each flow solve for `level` (both init substeps use
    /// level 1) with the temperature that froze the material laws.
    fn flow_solve(&mut self, _level: usize, _theta: &[f64], _problem: &FlowStepProblem) {}
    /// Called before each energy solve with the velocity it uses.
    fn energy_solve(&mut self, _level: usize, _u: &[f64]) {}
    /// Called after a flow solve converged.
    fn flow_solved(&mut self, _level: usize, _problem: &FlowStepProblem, _state: &SsnState) {}
    fn record(&mut self, _report: &StepReport<'_>) -> Result<(), StepError> {
        Ok(())
    }
}

impl StepObserver for () {}

pub struct InitFlow {
    pub substeps: [SsnState; 2],
    /// Average of the two substeps.
    pub state: SsnState,
}

/// Two backward-Euler SSN solves of size `2δt/3` from `u₀` (convection
/// evaluated at `u₀`), averaged into `u₁`.
pub fn init_flow(
    sim: &Simulation,
    u0: &[f64],
    theta0: &[f64],
    observer: &mut dyn StepObserver,
) -> Result<InitFlow, StepError> {
    let dt = sim.grid.dt;
    let coeff = 3.0 / (2.0 * dt);
    let conv = assemble_convection_vector(&sim.mesh, &sim.ops, u0).mul_vec(u0);
    let mut prev = SsnState::new(u0.to_vec(), vec![0.0; sim.mesh.n_quads()], vec![0.0; 4 * sim.mesh.n_triangles()]);
    let mut subs = Vec::with_capacity(2);
    for j in 1..=2 {
        let t = j as f64 * 2.0 * dt / 3.0;
        let f = (sim.forcing.flow)(t);
        let mu_prev = sim.ops.m_vec.mul_vec(&prev.u);
        let rhs: Vec<f64> = (0..f.len()).map(|i| f[i] - conv[i] + coeff * mu_prev[i]).collect();
        let problem = sim.flow_problem(theta0, coeff, rhs)?;
        observer.flow_solve(1, theta0, &problem);
        let state = sim.solve_flow(0, &problem, prev.restart())?;
        observer.flow_solved(1, &problem, &state);
        prev = state.clone();
        subs.push(state);
    }
    let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<f64>>();
    let state = SsnState::new(
        avg(&subs[0].u, &subs[1].u),
        avg(&subs[0].p, &subs[1].p),
        avg(&subs[0].q, &subs[1].q),
    );
    let second = subs.pop().expect("two substeps");
    let first = subs.pop().expect("two substeps");
    Ok(InitFlow { substeps: [first, second], state })
}

/// Flow at level `k + 2` from levels `k`, `k + 1`, laws frozen at `theta_in`.
pub fn flow_step(
    sim: &Simulation,
    k: usize,
    history: &FieldHistory,
    theta_in: &[f64],
    observer: &mut dyn StepObserver,
) -> Result<SsnState, StepError> {
    let dt = sim.grid.dt;
    let level = k + 2;
    let lam = lag(&history.u_prev, &history.u_curr);
    let conv = assemble_convection_vector(&sim.mesh, &sim.ops, &lam).mul_vec(&lam);
    let mu_curr = sim.ops.m_vec.mul_vec(&history.u_curr);
    let mu_prev = sim.ops.m_vec.mul_vec(&history.u_prev);
    let f = (sim.forcing.flow)(sim.grid.time(level));
    let rhs: Vec<f64> =
        (0..f.len()).map(|i| f[i] - conv[i] + 2.0 / dt * mu_curr[i] - 0.5 / dt * mu_prev[i]).collect();
    let problem = sim.flow_problem(theta_in, 1.5 / dt, rhs)?;
    observer.flow_solve(level, theta_in, &problem);
    let init = SsnState::new(history.u_curr.clone(), history.p_curr.clone(), history.q_curr.clone());
    let state = sim.solve_flow(level, &problem, init)?;
    observer.flow_solved(level, &problem, &state);
    Ok(state)
}

/// Temperature at level `k + 2` with the freshly computed `u_in = u_{k+2}`.
pub fn energy_step(sim: &Simulation, k: usize, history: &FieldHistory, u_in: &[f64]) -> Result<Vec<f64>, StepError> {
    let dt = sim.grid.dt;
    let level = k + 2;
    let cp = sim.params.cp;
    let lam_u = lag(&history.u_prev, &history.u_curr);
    let lam_t = lag(&history.theta_prev, &history.theta_curr);
    let conv = assemble_convection_scalar(&sim.mesh, &sim.ops, &lam_u).mul_vec(&lam_t);
    let m_curr = sim.ops.m_sca.mul_vec(&history.theta_curr);
    let m_prev = sim.ops.m_sca.mul_vec(&history.theta_prev);
    let mut rhs: Vec<f64> = (0..conv.len())
        .map(|i| -cp * conv[i] + 2.0 * cp / dt * m_curr[i] - 0.5 * cp / dt * m_prev[i])
        .collect();
    if let Some(s) = sim.heat_load(sim.grid.time(level)) {
        rhs.iter_mut().zip(s).for_each(|(r, v)| *r += v);
    }
    sim.solve_energy(level, u_in, 1.5 / dt, rhs)
}

/// `θ₁`: one backward-Euler energy step of size `δt` with `u₁`.
pub fn energy_init(sim: &Simulation, u1: &[f64], theta0: &[f64]) -> Result<Vec<f64>, StepError> {
    let dt = sim.grid.dt;
    let cp = sim.params.cp;
    let conv = assemble_convection_scalar(&sim.mesh, &sim.ops, u1).mul_vec(theta0);
    let m0 = sim.ops.m_sca.mul_vec(theta0);
    let mut rhs: Vec<f64> = (0..conv.len()).map(|i| -cp * conv[i] + cp / dt * m0[i]).collect();
    if let Some(s) = sim.heat_load(sim.grid.time(1)) {
        rhs.iter_mut().zip(s).for_each(|(r, v)| *r += v);
    }
    sim.solve_energy(1, u1, 1.0 / dt, rhs)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// `n_steps + 2` records: the two init substeps, then levels `1..=n_steps`.
    pub history: Vec<HistoryRecord>,
    pub ssn_log: Vec<SsnLogStep>,
    pub theta0: Vec<f64>,
    pub fields: FieldHistory,
    pub grid: TimeGrid,
}

impl RunResult {
    /// Mean SSN iteration count over the records that ran a solve.
    pub fn average_ssn_iterations(&self) -> f64 {
        average_ssn_iterations(&self.history)
    }
}

pub fn average_ssn_iterations(history: &[HistoryRecord]) -> f64 {
    let solved: Vec<usize> = history.iter().map(|r| r.ssn_iters).filter(|&i| i > 0).collect();
    if solved.is_empty() {
        0.0
    } else {
        solved.iter().sum::<usize>() as f64 / solved.len() as f64
    }
}

struct Recorder<'o> {
    observer: &'o mut dyn StepObserver,
    history: Vec<HistoryRecord>,
    ssn_log: Vec<SsnLogStep>,
}

impl Recorder<'_> {
    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        sim: &Simulation,
        kind: RecordKind,
        step: usize,
        t: f64,
        state: &SsnState,
        residual_history: &[f64],
        theta: &[f64],
        mask: &ActiveMask,
    ) -> Result<(), StepError> {
        let mu_t = viscosity_on_triangles(&sim.mesh, theta, &sim.params)?;
        let g_t = huber::yield_on_triangles(&sim.mesh, theta, &sim.params)?;
        let record = HistoryRecord::from_fields(
            step,
            t,
            residual_history,
            &state.u,
            theta,
            mask.fraction(),
            &sim.mesh,
            &sim.ops,
            &sim.params,
            sim.settings.q_exponent,
        )?;
        let report = StepReport {
            kind,
            step,
            t,
            residual_history,
            u: &state.u,
            p: &state.p,
            q: &state.q,
            theta,
            mu_t: &mu_t,
            g_t: &g_t,
            mask,
            record: &record,
        };
        self.observer.record(&report)?;
        self.history.push(record);
        self.ssn_log.push(SsnLogStep { step, t, deltas: residual_history.to_vec() });
        Ok(())
    }
}

/// The full time loop from `(u₀, θ₀)`.
pub fn run(
    sim: &Simulation,
    u0: &[f64],
    theta0: &[f64],
    observer: &mut dyn StepObserver,
) -> Result<RunResult, StepError> {
    let n = sim.mesh.n_nodes();
    if u0.len() != 2 * n || theta0.len() != n {
        return Err(StepError::Assembly(AssemblyError::DimensionMismatch {
            expected: 2 * n,
            got: u0.len(),
        }));
    }
    let grid = sim.grid;
    let mut rec = Recorder { observer, history: Vec::new(), ssn_log: Vec::new() };

    let init = init_flow(sim, u0, theta0, rec.observer)?;
    for (j, sub) in init.substeps.iter().enumerate() {
        let t = (j + 1) as f64 * 2.0 * grid.dt / 3.0;
        rec.emit(sim, RecordKind::InitSubstep, 0, t, sub, &sub.residual_history, theta0, &sub.mask)?;
    }
    let theta1 = if sim.energy_enabled {
        rec.observer.energy_solve(1, &init.state.u);
        energy_init(sim, &init.state.u, theta0)?
    } else {
        theta0.to_vec()
    };
    let g0 = huber::yield_on_triangles(&sim.mesh, theta0, &sim.params)?;
    let mask1 = huber::active_mask(&sim.ops.e, &init.state.u, &g0, &sim.reg);
    rec.emit(sim, RecordKind::Level, 1, grid.time(1), &init.state, &[], &theta1, &mask1)?;

    let mut hist = FieldHistory {
        u_prev: u0.to_vec(),
        u_curr: init.state.u.clone(),
        theta_prev: theta0.to_vec(),
        theta_curr: theta1,
        p_curr: init.state.p.clone(),
        q_curr: init.state.q.clone(),
    };
    for k in 0..grid.n_steps.saturating_sub(1) {
        let level = k + 2;
        let theta_in = hist.theta_curr.clone();
        let state = flow_step(sim, k, &hist, &theta_in, rec.observer)?;
        let theta_next = if sim.energy_enabled {
            rec.observer.energy_solve(level, &state.u);
            energy_step(sim, k, &hist, &state.u)?
        } else {
            hist.theta_curr.clone()
        };
        rec.emit(
            sim,
            RecordKind::Level,
            level,
            grid.time(level),
            &state,
            &state.residual_history,
            &theta_next,
            &state.mask,
        )?;
        hist.advance(&state, theta_next);
    }
    Ok(RunResult { history: rec.history, ssn_log: rec.ssn_log, theta0: theta0.to_vec(), fields: hist, grid })
}
