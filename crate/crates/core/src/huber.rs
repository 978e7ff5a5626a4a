//! Huber-regularized constitutive relation in its `max` form
//!
//! ```text
//! max(G_T, γ N(Eu)) ⊙ q = γ G_T ⊙ Eu
//! ```
//!
//! together with its semismooth derivative, the active-set indicator and the
//! radial projection of the multiplier onto `{ N(q) ≤ G_T }`.
//!
//! Per-triangle scalars (length `m`) broadcast over the four strain blocks of
//! length-`4m` vectors.

use crate::assembly::{triangle_average, AssemblyError, PhysicalParams};
use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    pub gamma: f64,
}

impl RegularizationParams {
    pub fn new(gamma: f64) -> Result<Self, AssemblyError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(AssemblyError::InvalidParameter(format!("gamma must be positive (got {gamma})")));
        }
        Ok(Self { gamma })
    }
}

/// Yielded (active) triangles: `γ ‖Eu‖_T ≥ g_T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveMask(Vec<bool>);

impl ActiveMask {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.0[t]
    }

    pub fn count_active(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.count_active() as f64 / self.0.len() as f64
        }
    }

    /// 1.0 on active triangles, 0.0 elsewhere.
    pub fn as_field(&self) -> Vec<f64> {
        self.0.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }
}

fn blocks(len: usize) -> usize {
    assert!(len % 4 == 0, "strain vector length {len} is not divisible by 4");
    len / 4
}

/// Euclidean norm of `(q_t, q_{t+m}, q_{t+2m}, q_{t+3m})` for each triangle.
pub fn triangle_norms(q: &[f64]) -> Vec<f64> {
    let m = blocks(q.len());
    (0..m)
        .map(|t| (q[t] * q[t] + q[m + t] * q[m + t] + q[2 * m + t] * q[2 * m + t] + q[3 * m + t] * q[3 * m + t]).sqrt())
        .collect()
}

/// `N(q)`: the per-triangle norm replicated over all four blocks.
pub fn norm_n(q: &[f64]) -> Vec<f64> {
    let norms = triangle_norms(q);
    norms.iter().cycle().take(q.len()).copied().collect()
}

/// `G_T`: yield stress at the vertex-averaged temperature.
pub fn yield_on_triangles(mesh: &Mesh, theta: &[f64], params: &PhysicalParams) -> Result<Vec<f64>, AssemblyError> {
    if theta.len() != mesh.n_nodes() {
        return Err(AssemblyError::DimensionMismatch { expected: mesh.n_nodes(), got: theta.len() });
    }
    let g: Vec<f64> = triangle_average(mesh, theta).into_iter().map(|th| params.yield_stress(th)).collect();
    if let Some((t, &v)) = g.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
        return Err(AssemblyError::NegativeYield { triangle: t, value: v });
    }
    Ok(g)
}

/// Residual `max(G, γN(Eu)) ⊙ q − γ G ⊙ Eu`, given the strains `eu = E u`.
pub fn max_residual_from_strain(eu: &[f64], q: &[f64], g_t: &[f64], reg: &RegularizationParams) -> Vec<f64> {
    let m = blocks(eu.len());
    assert_eq!(q.len(), eu.len());
    assert_eq!(g_t.len(), m);
    let norms = triangle_norms(eu);
    (0..4 * m)
        .map(|i| {
            let t = i % m;
            g_t[t].max(reg.gamma * norms[t]) * q[i] - reg.gamma * g_t[t] * eu[i]
        })
        .collect()
}

pub fn max_residual(e: &SparseMatrix, u: &[f64], q: &[f64], g_t: &[f64], reg: &RegularizationParams) -> Vec<f64> {
    max_residual_from_strain(&e.mul_vec(u), q, g_t, reg)
}

/// The multiplier solving the max relation for fixed strains:
/// `q = γ G Eu / max(G, γ N(Eu))`, zero where both vanish.
pub fn exact_multiplier(eu: &[f64], g_t: &[f64], reg: &RegularizationParams) -> Vec<f64> {
    let m = blocks(eu.len());
    let norms = triangle_norms(eu);
    (0..4 * m)
        .map(|i| {
            let t = i % m;
            let d = g_t[t].max(reg.gamma * norms[t]);
            if d > 0.0 {
                reg.gamma * g_t[t] * eu[i] / d
            } else {
                0.0
            }
        })
        .collect()
}

pub fn active_mask_from_strain(eu: &[f64], g_t: &[f64], reg: &RegularizationParams) -> ActiveMask {
    let norms = triangle_norms(eu);
    ActiveMask(norms.iter().zip(g_t).map(|(&nrm, &g)| reg.gamma * nrm >= g).collect())
}

pub fn active_mask(e: &SparseMatrix, u: &[f64], g_t: &[f64], reg: &RegularizationParams) -> ActiveMask {
    active_mask_from_strain(&e.mul_vec(u), g_t, reg)
}

/// Slant derivative of `N` at `w` (4m×4m): row `(a, t)` holds `w_b[t] / N_t`
/// in column `(b, t)` for every block `b`. Triangles with `N_t = 0` get zero
/// rows.
pub fn slant_norm_derivative(w: &[f64]) -> SparseMatrix {
    let m = blocks(w.len());
    let norms = triangle_norms(w);
    let mut t_builder = TripletBuilder::with_capacity(4 * m, 4 * m, 16 * m);
    for t in 0..m {
        if norms[t] == 0.0 {
            continue;
        }
        for a in 0..4 {
            for b in 0..4 {
                t_builder.push(a * m + t, b * m + t, w[b * m + t] / norms[t]);
            }
        }
    }
    t_builder.finalize()
}

/// Radial scaling of each triangle's multiplier onto `N(q) ≤ G_T`.
pub fn project_multiplier(q: &[f64], g_t: &[f64]) -> Vec<f64> {
    let m = blocks(q.len());
    assert_eq!(g_t.len(), m);
    let norms = triangle_norms(q);
    let scale: Vec<f64> = norms.iter().zip(g_t).map(|(&n, &g)| if n > g { g / n } else { 1.0 }).collect();
    q.iter().enumerate().map(|(i, &v)| v * scale[i % m]).collect()
}

/// Per-triangle 4×4 blocks of `γ(χ diag(q) N_w(Eu) − diag(G))`, stored as a
/// 4m×4m sparse matrix.
fn newton_s_inner(eu: &[f64], q: &[f64], g_t: &[f64], reg: &RegularizationParams, mask: &ActiveMask) -> SparseMatrix {
    let m = blocks(eu.len());
    let norms = triangle_norms(eu);
    let mut t_builder = TripletBuilder::with_capacity(4 * m, 4 * m, 16 * m);
    for t in 0..m {
        let active = mask.is_active(t) && norms[t] > 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let mut v = 0.0;
                if active {
                    v += q[a * m + t] * eu[b * m + t] / norms[t];
                }
                if a == b {
                    v -= g_t[t];
                }
                if v != 0.0 {
                    t_builder.push(a * m + t, b * m + t, reg.gamma * v);
                }
            }
        }
    }
    t_builder.finalize()
}

/// `S = γ(χ diag(q) N_u(Eu) − diag(G)) E` (4m×2n). With `projected`, `q` is
/// first replaced by its projection onto the feasible set.
pub fn build_newton_s(
    e: &SparseMatrix,
    u: &[f64],
    q: &[f64],
    g_t: &[f64],
    reg: &RegularizationParams,
    mask: &ActiveMask,
    projected: bool,
) -> SparseMatrix {
    let eu = e.mul_vec(u);
    let q_used = if projected { project_multiplier(q, g_t) } else { q.to_vec() };
    newton_s_inner(&eu, &q_used, g_t, reg, mask).matmul(e)
}
