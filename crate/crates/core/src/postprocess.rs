//! Diagnostics: discrete norms, parameter extrema, active fraction and the
//! per-time SSN decay table.

use std::fmt;

use thiserror::Error;

use crate::assembly::{triangle_average, AssembledOperators, PhysicalParams};
use crate::linalg::dot;
use crate::mesh::Mesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostprocessError {
    #[error("norm exponent must lie in (1, 2] (got {0})")]
    InvalidExponent(f64),
    #[error("sample time {requested} outside the logged range [{first}, {last}]")]
    SampleOutOfRange { requested: f64, first: f64, last: f64 },
    #[error("empty SSN log")]
    EmptyLog,
}

/// `(uᵀ (M + K) u)^{1/2}`.
pub fn norm_h1(u: &[f64], ops: &AssembledOperators) -> f64 {
    let mu = ops.m_vec.mul_vec(u);
    let ku = ops.k_vec.mul_vec(u);
    (dot(u, &mu) + dot(u, &ku)).max(0.0).sqrt()
}

/// `(Σ_T |T| (|θ_T|^q + ‖∇θ_T‖^q))^{1/q}` with centroid values.
pub fn norm_wq(theta: &[f64], mesh: &Mesh, ops: &AssembledOperators, q: f64) -> Result<f64, PostprocessError> {
    if !(q > 1.0 && q <= 2.0) {
        return Err(PostprocessError::InvalidExponent(q));
    }
    let centroid = triangle_average(mesh, theta);
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = &ops.grads[t];
        let gx: f64 = (0..3).map(|k| theta[tri[k]] * g[k][0]).sum();
        let gy: f64 = (0..3).map(|k| theta[tri[k]] * g[k][1]).sum();
        sum += mesh.tri_area[t] * (centroid[t].abs().powf(q) + gx.hypot(gy).powf(q));
    }
    Ok(sum.powf(1.0 / q))
}

/// `(min, max)` of `law` over the triangle-averaged field.
pub fn law_range(mesh: &Mesh, theta: &[f64], law: impl Fn(f64) -> f64) -> (f64, f64) {
    triangle_average(mesh, theta)
        .into_iter()
        .map(law)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub const HISTORY_HEADER: &str =
    "step,t,ssn_iters,delta_1,delta_2,delta_3,u_h1,theta_wq,mu_min,mu_max,g_min,g_max,active_fraction";

/// Per-step scalar diagnostics (one row of `history.csv`).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub step: usize,
    pub t: f64,
    pub ssn_iters: usize,
    /// Last (up to) three SSN increments, oldest first.
    pub delta_last3: Vec<f64>,
    pub u_h1: f64,
    pub theta_wq: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub active_fraction: f64,
}

impl HistoryRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn from_fields(
        step: usize,
        t: f64,
        residual_history: &[f64],
        u: &[f64],
        theta: &[f64],
        active_fraction: f64,
        mesh: &Mesh,
        ops: &AssembledOperators,
        params: &PhysicalParams,
        q_exponent: f64,
    ) -> Result<Self, PostprocessError> {
        let (mu_min, mu_max) = law_range(mesh, theta, |th| params.viscosity(th));
        let (g_min, g_max) = law_range(mesh, theta, |th| params.yield_stress(th));
        Ok(Self {
            step,
            t,
            ssn_iters: residual_history.len(),
            delta_last3: last3(residual_history),
            u_h1: norm_h1(u, ops),
            theta_wq: norm_wq(theta, mesh, ops, q_exponent)?,
            mu_min,
            mu_max,
            g_min,
            g_max,
            active_fraction,
        })
    }

    pub fn csv_row(&self) -> String {
        let d = |i: usize| self.delta_last3.get(i).map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{},{:e},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.step,
            self.t,
            self.ssn_iters,
            d(0),
            d(1),
            d(2),
            self.u_h1,
            self.theta_wq,
            self.mu_min,
            self.mu_max,
            self.g_min,
            self.g_max,
            self.active_fraction
        )
    }
}

pub fn last3(history: &[f64]) -> Vec<f64> {
    history[history.len().saturating_sub(3)..].to_vec()
}

/// Newton increments of one inner solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SsnLogStep {
    pub step: usize,
    pub t: f64,
    pub deltas: Vec<f64>,
}

pub const SSN_LOG_HEADER: &str = "step,t,iteration,delta";

impl SsnLogStep {
    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.deltas.iter().enumerate().map(move |(i, d)| format!("{},{:e},{},{:e}", self.step, self.t, i + 1, d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub requested: f64,
    pub t: f64,
    pub iterations: usize,
    pub last3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
}

impl fmt::Display for Table1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10} {:>10} {:>12} {:>12} {:>12} {:>6}", "t", "t_logged", "delta_1", "delta_2", "delta_3", "iters")?;
        for r in &self.rows {
            let d = |i: usize| r.last3.get(i).map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:>10.4} {:>10.4} {:>12} {:>12} {:>12} {:>6}",
                r.requested,
                r.t,
                d(0),
                d(1),
                d(2),
                r.iterations
            )?;
        }
        Ok(())
    }
}

/// For each sample time, the logged solve closest in time: its last three
/// increments and iteration count. Solves without iterations are skipped.
pub fn table1_report(log: &[SsnLogStep], sample_times: &[f64]) -> Result<Table1, PostprocessError> {
    let solves: Vec<&SsnLogStep> = log.iter().filter(|s| !s.deltas.is_empty()).collect();
    if solves.is_empty() {
        return Err(PostprocessError::EmptyLog);
    }
    let first = solves.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let last = solves.iter().map(|s| s.t).fold(f64::NEG_INFINITY, f64::max);
    // tolerance of half the smallest spacing between logged times
    let mut times: Vec<f64> = solves.iter().map(|s| s.t).collect();
    times.sort_by(f64::total_cmp);
    let slack = times.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).fold(f64::INFINITY, f64::min);
    let slack = if slack.is_finite() { 0.5 * slack } else { 0.0 };
    let mut rows = Vec::with_capacity(sample_times.len());
    for &requested in sample_times {
        if requested < first - slack || requested > last + slack {
            return Err(PostprocessError::SampleOutOfRange { requested, first, last });
        }
        let best = solves
            .iter()
            .min_by(|a, b| (a.t - requested).abs().total_cmp(&(b.t - requested).abs()))
            .expect("non-empty");
        rows.push(Table1Row { requested, t: best.t, iterations: best.deltas.len(), last3: last3(&best.deltas) });
    }
    Ok(Table1 { rows })
}
