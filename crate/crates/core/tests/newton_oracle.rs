//! The reduced Newton solve (multiplier eliminated, Dirichlet rows
//! constrained, pressure modes pinned) against the full 3×3 block system
//! assembled densely from scratch.

mod common;

use bingham::assembly::PhysicalParams;
use bingham::huber::{self, RegularizationParams};
use bingham::mesh::build_cross_grid;
use bingham::ssn::{newton_step, ssn_solve, FlowStepProblem, SsnState};
use bingham::stepper::{Forcing, Simulation, SolverSettings, TimeGrid};
use common::*;

fn params() -> PhysicalParams {
    PhysicalParams { mu0: 1.0, delta_mu: 0.5, g0: 10.0, delta_g: 8.0, kappa: 10.0, cp: 1.0, alpha: 100.0, beta: 15.0 }
}

fn problem(nx: usize, gamma: f64, scale_f: f64) -> (Simulation, FlowStepProblem) {
    let mesh = build_cross_grid(nx, nx, 1.0, 1.0).unwrap();
    let forcing = Forcing::experiments(&mesh);
    let sim = Simulation::new(
        mesh,
        params(),
        RegularizationParams::new(gamma).unwrap(),
        TimeGrid::fixed(0.01, 1).unwrap(),
        SolverSettings::default(),
        forcing,
    )
    .unwrap();
    let n = sim.mesh.n_nodes();
    let theta: Vec<f64> = sim.mesh.nodes.iter().map(|p| 0.3 * p[0] + 0.2 * p[1] * p[1]).collect();
    let f: Vec<f64> = (sim.forcing.flow)(0.0).into_iter().map(|v| scale_f * v).collect();
    assert_eq!(f.len(), 2 * n);
    let prob = sim.flow_problem(&theta, 150.0, f).unwrap();
    (sim, prob)
}

/// Full Newton matrix and right-hand side in the unknowns
/// `(δu, δp, δq, λ)`, λ the multipliers of the pressure constraints.
fn dense_newton(prob: &FlowStepProblem, s: &SsnState) -> (Dense, Vec<f64>) {
    let nu = prob.n_velocity();
    let np = prob.n_pressure();
    let nq = prob.n_multiplier();
    let m = nq / 4;
    let nc = prob.pressure_constraints.len();
    let xi = dense(&prob.xi);
    let b = dense(&prob.b);
    let qg = dense(&prob.q_g);
    let e = dense(&prob.e);
    let gamma = prob.reg.gamma;
    let g = &prob.g_t;

    let eu = matvec(&e, &s.u);
    let norm: Vec<f64> =
        (0..m).map(|t| (0..4).map(|a| eu[a * m + t] * eu[a * m + t]).sum::<f64>().sqrt()).collect();
    let qn: Vec<f64> = (0..m).map(|t| (0..4).map(|a| s.q[a * m + t].powi(2)).sum::<f64>().sqrt()).collect();
    let q_proj: Vec<f64> = (0..nq).map(|i| if qn[i % m] > g[i % m] { s.q[i] * g[i % m] / qn[i % m] } else { s.q[i] }).collect();
    let d: Vec<f64> = (0..nq).map(|i| g[i % m].max(gamma * norm[i % m])).collect();

    let dim = nu + np + nq + nc;
    let (op, oq, oc) = (nu, nu + np, nu + np + nq);
    let mut a = zeros(dim, dim);
    let mut rhs = vec![0.0; dim];

    let xu = matvec(&xi, &s.u);
    let bp = matvec(&b, &s.p);
    let qq = matvec(&qg, &s.q);
    for i in 0..nu {
        if prob.fixed[i] {
            a[i][i] = 1.0;
            continue;
        }
        a[i][..nu].copy_from_slice(&xi[i]);
        a[i][op..op + np].copy_from_slice(&b[i]);
        a[i][oq..oq + nq].copy_from_slice(&qg[i]);
        rhs[i] = prob.f[i] - xu[i] - bp[i] - qq[i];
    }
    for k in 0..np {
        for j in 0..nu {
            a[op + k][j] = b[j][k];
        }
        for c in 0..nc {
            a[op + k][oc + c] = prob.pressure_constraints[c][k];
        }
        rhs[op + k] = -(0..nu).map(|j| b[j][k] * s.u[j]).sum::<f64>();
    }
    for l in 0..nq {
        let t = l % m;
        let active = gamma * norm[t] >= g[t];
        for j in 0..nu {
            let mut v = -gamma * g[t] * e[l][j];
            if active {
                let dn: f64 = (0..4).map(|bb| eu[bb * m + t] * e[bb * m + t][j]).sum::<f64>() / norm[t];
                v += gamma * q_proj[l] * dn;
            }
            a[oq + l][j] = v;
        }
        a[oq + l][oq + l] = d[l];
        rhs[oq + l] = gamma * g[t] * eu[l] - d[l] * s.q[l];
    }
    for c in 0..nc {
        for k in 0..np {
            a[oc + c][op + k] = prob.pressure_constraints[c][k];
        }
        rhs[oc + c] = -(0..np).map(|k| prob.pressure_constraints[c][k] * s.p[k]).sum::<f64>();
    }
    (a, rhs)
}

fn random_state(prob: &FlowStepProblem, seed: u64, u_scale: f64) -> SsnState {
    let nu = prob.n_velocity();
    let mut u: Vec<f64> = pseudo_random(seed, nu).into_iter().map(|v| u_scale * v).collect();
    for (ui, &fixed) in u.iter_mut().zip(&prob.fixed) {
        if fixed {
            *ui = 0.0;
        }
    }
    let q_raw: Vec<f64> = pseudo_random(seed + 1, prob.n_multiplier()).into_iter().map(|v| 8.0 * v).collect();
    // feasible multiplier, so the projection inside the Newton matrix is inactive
    let q = huber::project_multiplier(&q_raw, &prob.g_t);
    SsnState::new(u, vec![0.0; prob.n_pressure()], q)
}

fn compare(prob: &FlowStepProblem, state: &SsnState) -> (f64, usize) {
    let (du, dp, dq) = newton_step(prob, state).unwrap();
    let (a, rhs) = dense_newton(prob, state);
    let x = lu_solve(a, rhs);
    let (nu, np, nq) = (prob.n_velocity(), prob.n_pressure(), prob.n_multiplier());
    let scale = 1.0 + max_abs(&x);
    let err = max_abs_diff(&du, &x[..nu])
        .max(max_abs_diff(&dp, &x[nu..nu + np]))
        .max(max_abs_diff(&dq, &x[nu + np..nu + np + nq]));
    let active = huber::active_mask(&prob.e, &state.u, &prob.g_t, &prob.reg).count_active();
    (err / scale, active)
}

#[test]
fn reduced_newton_matches_dense_block_system() {
    let (_, prob) = problem(2, 1e3, 1.0);
    let mut saw_mixed = false;
    for (seed, u_scale) in [(1, 0.002), (3, 0.004), (5, 0.006), (9, 0.008), (7, 0.01), (11, 0.05), (21, 0.0)] {
        let state = random_state(&prob, seed, u_scale);
        let (err, active) = compare(&prob, &state);
        assert!(err < 1e-9, "seed {seed}: relative difference {err:e}");
        saw_mixed |= active > 0 && active < prob.g_t.len();
    }
    assert!(saw_mixed, "no sample exercised a mixed active set");
}

#[test]
fn projection_enters_only_the_derivative_term() {
    let (_, prob) = problem(2, 1e3, 1.0);
    let mut state = random_state(&prob, 3, 0.004);
    // push every multiplier outside the feasible set
    state.q.iter_mut().for_each(|v| *v *= 40.0);
    let qn = huber::triangle_norms(&state.q);
    assert!(qn.iter().zip(&prob.g_t).any(|(n, g)| n > g));
    let (err, _) = compare(&prob, &state);
    assert!(err < 1e-9, "relative difference {err:e}");
}

#[test]
fn reduced_newton_matches_dense_on_larger_mesh() {
    let (_, prob) = problem(3, 1e2, 1.0);
    let state = random_state(&prob, 5, 0.05);
    let (err, _) = compare(&prob, &state);
    assert!(err < 1e-9, "relative difference {err:e}");
}

#[test]
fn dense_jacobian_agrees_with_finite_differences() {
    // sanity check of the oracle itself: the max-relation row is the
    // derivative of D(u) q − γ G Eu for a feasible q
    let (_, prob) = problem(2, 1e3, 1.0);
    let state = random_state(&prob, 7, 0.01);
    let (a, _) = dense_newton(&prob, &state);
    let e = dense(&prob.e);
    let nq = prob.n_multiplier();
    let m = nq / 4;
    let gamma = prob.reg.gamma;
    let f3 = |u: &[f64]| -> Vec<f64> {
        let eu = matvec(&e, u);
        (0..nq)
            .map(|l| {
                let t = l % m;
                let n = (0..4).map(|b| eu[b * m + t].powi(2)).sum::<f64>().sqrt();
                prob.g_t[t].max(gamma * n) * state.q[l] - gamma * prob.g_t[t] * eu[l]
            })
            .collect()
    };
    let oq = prob.n_velocity() + prob.n_pressure();
    let h = 1e-7;
    let mut worst: f64 = 0.0;
    for j in (0..prob.n_velocity()).filter(|&j| !prob.fixed[j]) {
        let mut up = state.u.clone();
        let mut um = state.u.clone();
        up[j] += h;
        um[j] -= h;
        let (fp, fm) = (f3(&up), f3(&um));
        for l in 0..nq {
            let fd = (fp[l] - fm[l]) / (2.0 * h);
            worst = worst.max((fd - a[oq + l][j]).abs() / (1.0 + a[oq + l][j].abs()));
        }
    }
    assert!(worst < 1e-5, "{worst:e}");
}

#[test]
fn full_solve_satisfies_the_nonlinear_system() {
    let (_, prob) = problem(3, 1e3, 1.0);
    let init = SsnState::zeros(prob.n_velocity(), prob.n_pressure(), prob.n_multiplier());
    let s = ssn_solve(&prob, init, 1e-10, 50).unwrap();
    let r = prob.free_momentum_residual(&s.u, &s.p, &s.q);
    let scale = 1.0 + max_abs(&prob.f);
    assert!(max_abs(&r) < 1e-8 * scale, "{:e}", max_abs(&r));
    assert!(max_abs(&prob.divergence(&s.u)) < 1e-10);
    let mr = prob.max_residual(&s.u, &s.q);
    assert!(max_abs(&mr) < 1e-6 * prob.reg.gamma * max_abs(&prob.g_t), "{:e}", max_abs(&mr));
    for c in &prob.pressure_constraints {
        assert!(c.iter().zip(&s.p).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
    }
}
