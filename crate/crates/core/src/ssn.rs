//! Semismooth Newton solver for one implicit flow step
//!
//! ```text
//! Ξ u + B p + Q_g q                   = F
//! Bᵀ u                                = 0
//! max(G, γ N(Eu)) ⊙ q − γ G ⊙ Eu      = 0
//! ```
//!
//! Each Newton step eliminates `δq` through the diagonal block
//! `D = max(G, γN(Eu))`, solves the reduced velocity–pressure saddle system
//! and back-substitutes. The multiplier inside the slant derivative is
//! projected onto `{ N(q) ≤ G }` before use.

use thiserror::Error;

use crate::huber::{self, ActiveMask, RegularizationParams};
use crate::linalg::{dot, solve_saddle, LinalgError, SaddleSystem, SparseMatrix};

pub const DEFAULT_MAX_ITER: usize = 50;

/// `√ε` for `f64`.
pub fn default_tolerance() -> f64 {
    f64::EPSILON.sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsnError {
    #[error("semismooth Newton did not converge in {iterations} iterations (last residual {last:e})")]
    MaxIterationsExceeded { iterations: usize, last: f64, residual_history: Vec<f64> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid solver setting: {0}")]
    InvalidSetting(String),
}

/// Weights of the discrete norms used in the increment measure `δ`.
#[derive(Debug, Clone)]
pub struct IncrementNorms {
    /// `M + K` on velocities.
    pub h1: SparseMatrix,
    pub quad_area: Vec<f64>,
    pub tri_area: Vec<f64>,
}

impl IncrementNorms {
    pub fn velocity(&self, du: &[f64]) -> f64 {
        dot(du, &self.h1.mul_vec(du)).max(0.0).sqrt()
    }

    pub fn pressure(&self, dp: &[f64]) -> f64 {
        dp.iter().zip(&self.quad_area).map(|(v, a)| a * v * v).sum::<f64>().sqrt()
    }

    pub fn multiplier(&self, dq: &[f64]) -> f64 {
        let m = self.tri_area.len();
        dq.iter().enumerate().map(|(i, v)| self.tri_area[i % m] * v * v).sum::<f64>().sqrt()
    }

    /// `‖du‖_{H¹} + ‖dp‖_{L²} + ‖dq‖_{(L²)⁴}`.
    pub fn delta(&self, du: &[f64], dp: &[f64], dq: &[f64]) -> f64 {
        self.velocity(du) + self.pressure(dp) + self.multiplier(dq)
    }
}

/// Data of one implicit flow step; θ-dependent parts are frozen.
#[derive(Debug, Clone)]
pub struct FlowStepProblem {
    /// `Ξ = 3/(2δt) M + A_μ(θ)` (or any SPD velocity block).
    pub xi: SparseMatrix,
    pub b: SparseMatrix,
    pub q_g: SparseMatrix,
    pub e: SparseMatrix,
    pub g_t: Vec<f64>,
    pub f: Vec<f64>,
    pub reg: RegularizationParams,
    /// Dirichlet velocity dofs; their values are taken from the initial state.
    pub fixed: Vec<bool>,
    /// Pressure functionals pinned to zero (kernel of the constrained `B`).
    pub pressure_constraints: Vec<Vec<f64>>,
    pub norms: IncrementNorms,
}

impl FlowStepProblem {
    pub fn n_velocity(&self) -> usize {
        self.xi.rows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.cols()
    }

    pub fn n_multiplier(&self) -> usize {
        self.e.rows()
    }

    /// True when no triangle carries a yield stress: the system is linear.
    pub fn is_linear(&self) -> bool {
        self.g_t.iter().all(|&g| g == 0.0)
    }

    fn validate(&self) -> Result<(), SsnError> {
        let nu = self.n_velocity();
        let np = self.n_pressure();
        let nq = self.n_multiplier();
        let ok = self.xi.cols() == nu
            && self.b.rows() == nu
            && self.q_g.rows() == nu
            && self.q_g.cols() == nq
            && self.e.cols() == nu
            && nq % 4 == 0
            && self.g_t.len() == nq / 4
            && self.f.len() == nu
            && self.fixed.len() == nu
            && self.norms.h1.rows() == nu
            && self.norms.quad_area.len() == np
            && self.norms.tri_area.len() == nq / 4;
        if ok {
            Ok(())
        } else {
            Err(SsnError::DimensionMismatch(format!("velocity {nu}, pressure {np}, multiplier {nq}")))
        }
    }

    fn check_state(&self, s: &SsnState) -> Result<(), SsnError> {
        if s.u.len() != self.n_velocity() || s.p.len() != self.n_pressure() || s.q.len() != self.n_multiplier() {
            return Err(SsnError::DimensionMismatch(format!(
                "state ({}, {}, {}) vs problem ({}, {}, {})",
                s.u.len(),
                s.p.len(),
                s.q.len(),
                self.n_velocity(),
                self.n_pressure(),
                self.n_multiplier()
            )));
        }
        Ok(())
    }

    /// `Ξu + Bp + Q_g q − F`.
    pub fn momentum_residual(&self, u: &[f64], p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut r = self.xi.mul_vec(u);
        let bp = self.b.mul_vec(p);
        let qq = self.q_g.mul_vec(q);
        for i in 0..r.len() {
            r[i] += bp[i] + qq[i] - self.f[i];
        }
        r
    }

    /// Momentum residual restricted to free dofs.
    pub fn free_momentum_residual(&self, u: &[f64], p: &[f64], q: &[f64]) -> Vec<f64> {
        let mut r = self.momentum_residual(u, p, q);
        for (ri, &fixed) in r.iter_mut().zip(&self.fixed) {
            if fixed {
                *ri = 0.0;
            }
        }
        r
    }

    pub fn divergence(&self, u: &[f64]) -> Vec<f64> {
        self.b.mul_transpose_vec(u)
    }

    pub fn max_residual(&self, u: &[f64], q: &[f64]) -> Vec<f64> {
        huber::max_residual(&self.e, u, q, &self.g_t, &self.reg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsnState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub iter: usize,
    /// `δ` of every Newton step taken.
    pub residual_history: Vec<f64>,
    /// Active set at the last linearization.
    pub mask: ActiveMask,
}

impl SsnState {
    pub fn new(u: Vec<f64>, p: Vec<f64>, q: Vec<f64>) -> Self {
        Self { u, p, q, iter: 0, residual_history: Vec::new(), mask: ActiveMask::from_flags(Vec::new()) }
    }

    pub fn zeros(nu: usize, np: usize, nq: usize) -> Self {
        Self::new(vec![0.0; nu], vec![0.0; np], vec![0.0; nq])
    }

    /// Same iterate, counters reset: the warm start for the next solve.
    pub fn restart(&self) -> Self {
        Self::new(self.u.clone(), self.p.clone(), self.q.clone())
    }
}

/// All pieces of the Newton system at one iterate.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// `Ŝ` (4m×2n), built with the projected multiplier.
    pub s_hat: SparseMatrix,
    /// `max(G, γN(Eu))` per strain component, 1 where both vanish.
    pub d: Vec<f64>,
    /// `F − Ξu − Bp − Q_g q`.
    pub r1: Vec<f64>,
    /// `−Bᵀu`.
    pub r2: Vec<f64>,
    /// `γ G ⊙ Eu − D ⊙ q`.
    pub r3: Vec<f64>,
    pub mask: ActiveMask,
}

pub fn linearize(problem: &FlowStepProblem, state: &SsnState) -> Linearization {
    let eu = problem.e.mul_vec(&state.u);
    let m = problem.g_t.len();
    let norms = huber::triangle_norms(&eu);
    let gamma = problem.reg.gamma;
    let d: Vec<f64> = (0..4 * m)
        .map(|i| {
            let t = i % m;
            let v = problem.g_t[t].max(gamma * norms[t]);
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    let mask = huber::active_mask_from_strain(&eu, &problem.g_t, &problem.reg);
    let s_hat = huber::build_newton_s(&problem.e, &state.u, &state.q, &problem.g_t, &problem.reg, &mask, true);
    let r1: Vec<f64> = problem.momentum_residual(&state.u, &state.p, &state.q).into_iter().map(|v| -v).collect();
    let r2: Vec<f64> = problem.divergence(&state.u).into_iter().map(|v| -v).collect();
    let r3: Vec<f64> = (0..4 * m).map(|i| gamma * problem.g_t[i % m] * eu[i] - d[i] * state.q[i]).collect();
    Linearization { s_hat, d, r1, r2, r3, mask }
}

/// One Newton increment `(δu, δp, δq)` at `state`.
pub fn newton_step(problem: &FlowStepProblem, state: &SsnState) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), SsnError> {
    problem.validate()?;
    problem.check_state(state)?;
    let lin = linearize(problem, state);
    let (du, dp, dq) = solve_linearization(problem, state, &lin)?;
    Ok((du, dp, dq))
}

fn solve_linearization(
    problem: &FlowStepProblem,
    state: &SsnState,
    lin: &Linearization,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), SsnError> {
    let inv_d: Vec<f64> = lin.d.iter().map(|v| 1.0 / v).collect();
    // K = Ξ − Q_g D⁻¹ Ŝ
    let qd = problem.q_g.scale(None, Some(&inv_d));
    let k = if problem.is_linear() {
        problem.xi.clone()
    } else {
        problem.xi.add_scaled(1.0, &qd.matmul(&lin.s_hat), -1.0)
    };
    let d_r3: Vec<f64> = lin.r3.iter().zip(&inv_d).map(|(r, w)| r * w).collect();
    let q_r3 = qd.mul_vec(&lin.r3);
    let b_free = problem.b.zero_rows(&problem.fixed);
    // solve for the new pressure directly so the pinned modes hold exactly
    let bp = b_free.mul_vec(&state.p);
    let mut rhs_u: Vec<f64> = (0..lin.r1.len()).map(|i| lin.r1[i] - q_r3[i] + bp[i]).collect();
    for (r, &fixed) in rhs_u.iter_mut().zip(&problem.fixed) {
        if fixed {
            *r = 0.0;
        }
    }
    let sys = SaddleSystem {
        a_block: k.constrain_symmetric(&problem.fixed),
        b_block: b_free,
        rhs_u,
        rhs_p: lin.r2.clone(),
        constraints: problem.pressure_constraints.clone(),
    };
    let (du, p_new) = solve_saddle(&sys)?;
    let dp: Vec<f64> = p_new.iter().zip(&state.p).map(|(a, b)| a - b).collect();
    let s_du = lin.s_hat.mul_vec(&du);
    let dq: Vec<f64> = (0..d_r3.len()).map(|i| d_r3[i] - s_du[i] * inv_d[i]).collect();
    Ok((du, dp, dq))
}

/// Newton iteration from `init` until `δ ≤ tol`.
///
/// Without yield stress the system is linear; one step solves it and the
/// state is returned after that single iteration.
pub fn ssn_solve(problem: &FlowStepProblem, init: SsnState, tol: f64, max_iter: usize) -> Result<SsnState, SsnError> {
    if !(tol > 0.0) {
        return Err(SsnError::InvalidSetting(format!("tolerance must be positive (got {tol})")));
    }
    if max_iter == 0 {
        return Err(SsnError::InvalidSetting("max_iter must be at least 1".into()));
    }
    problem.validate()?;
    problem.check_state(&init)?;
    let linear = problem.is_linear();
    let mut state = init;
    state.iter = 0;
    state.residual_history.clear();
    if linear {
        state.q.iter_mut().for_each(|v| *v = 0.0);
    }
    while state.iter < max_iter {
        let lin = linearize(problem, &state);
        let (du, dp, dq) = solve_linearization(problem, &state, &lin)?;
        let delta = problem.norms.delta(&du, &dp, &dq);
        add(&mut state.u, &du);
        add(&mut state.p, &dp);
        add(&mut state.q, &dq);
        state.iter += 1;
        state.residual_history.push(delta);
        state.mask = lin.mask;
        if delta <= tol || linear {
            state.mask = huber::active_mask(&problem.e, &state.u, &problem.g_t, &problem.reg);
            return Ok(state);
        }
    }
    Err(SsnError::MaxIterationsExceeded {
        iterations: state.iter,
        last: state.residual_history.last().copied().unwrap_or(f64::NAN),
        residual_history: state.residual_history,
    })
}

fn add(x: &mut [f64], dx: &[f64]) {
    x.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
}
