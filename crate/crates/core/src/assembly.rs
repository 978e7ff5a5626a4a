//! Finite-element matrices and load vectors of the semi-discrete flow and
//! energy systems.
//!
//! Velocity coefficients are stored blockwise, `(u₁ at all nodes, u₂ at all
//! nodes)`, so velocity vectors have length `2n`. Strain-like quantities use
//! four blocks of length `m` (one entry per triangle): `E₁₁, E₁₂, E₂₁, E₂₂`.

use thiserror::Error;

use crate::linalg::{SparseMatrix, TripletBuilder};
use crate::mesh::Mesh;

/// Density is fixed to one throughout.
pub const DENSITY: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("viscosity is not positive on triangle {triangle} (mu = {value})")]
    NonPositiveViscosity { triangle: usize, value: f64 },
    #[error("yield stress is negative on triangle {triangle} (g = {value})")]
    NegativeYield { triangle: usize, value: f64 },
    #[error("invalid physical parameter: {0}")]
    InvalidParameter(String),
    #[error("vector of length {got} does not match expected length {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Material and thermal coefficients. Viscosity and yield stress are affine
/// in temperature: `μ(θ) = mu0 + delta_mu θ`, `g(θ) = g0 + delta_g θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mu0: f64,
    pub delta_mu: f64,
    pub g0: f64,
    pub delta_g: f64,
    pub kappa: f64,
    pub cp: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl PhysicalParams {
    pub fn viscosity(&self, theta: f64) -> f64 {
        self.mu0 + self.delta_mu * theta
    }

    pub fn yield_stress(&self, theta: f64) -> f64 {
        self.g0 + self.delta_g * theta
    }

    /// Checks positivity and that μ > 0, g ≥ 0 on the whole range θ ∈ [0, 1].
    pub fn validate(&self) -> Result<(), AssemblyError> {
        let all = [self.mu0, self.delta_mu, self.g0, self.delta_g, self.kappa, self.cp, self.alpha, self.beta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(AssemblyError::InvalidParameter("all parameters must be finite".into()));
        }
        if self.mu0 <= 0.0 {
            return Err(AssemblyError::InvalidParameter(format!("mu0 must be positive (got {})", self.mu0)));
        }
        if self.viscosity(1.0) <= 0.0 {
            return Err(AssemblyError::InvalidParameter(format!(
                "viscosity mu0 + delta_mu must be positive on [0, 1] (got {})",
                self.viscosity(1.0)
            )));
        }
        if self.g0 < 0.0 || self.yield_stress(1.0) < 0.0 {
            return Err(AssemblyError::InvalidParameter(format!(
                "yield stress must be non-negative on [0, 1] (g(0) = {}, g(1) = {})",
                self.g0,
                self.yield_stress(1.0)
            )));
        }
        if self.kappa <= 0.0 {
            return Err(AssemblyError::InvalidParameter(format!("kappa must be positive (got {})", self.kappa)));
        }
        if self.cp <= 0.0 {
            return Err(AssemblyError::InvalidParameter(format!("cp must be positive (got {})", self.cp)));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(AssemblyError::InvalidParameter("alpha and beta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gradients of the three barycentric basis functions of every triangle.
pub fn basis_gradients(mesh: &Mesh) -> Vec<[[f64; 2]; 3]> {
    (0..mesh.n_triangles())
        .map(|t| {
            let [a, b, c] = mesh.triangles[t];
            let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
            let two_area = 2.0 * mesh.tri_area[t];
            [
                [(pb[1] - pc[1]) / two_area, (pc[0] - pb[0]) / two_area],
                [(pc[1] - pa[1]) / two_area, (pa[0] - pc[0]) / two_area],
                [(pa[1] - pb[1]) / two_area, (pb[0] - pa[0]) / two_area],
            ]
        })
        .collect()
}

/// Local 4×6 strain matrix mapping `(u₁ₐ, u₁ᵦ, u₁ᵧ, u₂ₐ, u₂ᵦ, u₂ᵧ)` to
/// `(E₁₁, E₁₂, E₂₁, E₂₂)` on one triangle.
fn local_strain(grads: &[[f64; 2]; 3]) -> [[f64; 6]; 4] {
    let mut l = [[0.0; 6]; 4];
    for k in 0..3 {
        l[0][k] = grads[k][0];
        l[1][k] = 0.5 * grads[k][1];
        l[1][3 + k] = 0.5 * grads[k][0];
        l[3][3 + k] = grads[k][1];
    }
    l[2] = l[1];
    l
}

fn local_dofs(tri: &[usize; 3], n: usize) -> [usize; 6] {
    [tri[0], tri[1], tri[2], n + tri[0], n + tri[1], n + tri[2]]
}

/// Constant (θ- and u-independent) operators of the discretization.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// Velocity mass matrix (2n×2n).
    pub m_vec: SparseMatrix,
    /// Scalar P1 mass matrix (n×n).
    pub m_sca: SparseMatrix,
    /// Scalar P1 stiffness matrix (n×n).
    pub a_sca: SparseMatrix,
    /// Robin boundary mass on Γ (n×n).
    pub m_gamma: SparseMatrix,
    /// Divergence coupling `-(p, ∇·v)` (2n×ℓ).
    pub b: SparseMatrix,
    /// Strain operator (4m×2n).
    pub e: SparseMatrix,
    /// Vector Laplacian `diag(A, A)` (2n×2n).
    pub k_vec: SparseMatrix,
    /// Triangle areas.
    pub tri_weights: Vec<f64>,
    pub grads: Vec<[[f64; 2]; 3]>,
    /// No-slip velocity dofs (both components of every boundary node).
    pub velocity_fixed: Vec<bool>,
}

impl AssembledOperators {
    pub fn n_nodes(&self) -> usize {
        self.m_sca.rows()
    }

    pub fn n_triangles(&self) -> usize {
        self.tri_weights.len()
    }

    /// `M + K` on velocities; defines the discrete H¹ norm.
    pub fn h1_matrix(&self) -> SparseMatrix {
        self.m_vec.add_scaled(1.0, &self.k_vec, 1.0)
    }
}

pub fn assemble_constant_operators(mesh: &Mesh) -> AssembledOperators {
    let n = mesh.n_nodes();
    let m = mesh.n_triangles();
    let grads = basis_gradients(mesh);

    let mut mass = TripletBuilder::with_capacity(n, n, 9 * m);
    let mut stiff = TripletBuilder::with_capacity(n, n, 9 * m);
    let mut b = TripletBuilder::with_capacity(2 * n, mesh.n_quads(), 6 * m);
    let mut e = TripletBuilder::with_capacity(4 * m, 2 * n, 12 * m);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let area = mesh.tri_area[t];
        let g = &grads[t];
        for i in 0..3 {
            for j in 0..3 {
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push(tri[i], tri[j], mij);
                stiff.push(tri[i], tri[j], area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            }
        }
        let q = mesh.tri_quad[t];
        for k in 0..3 {
            // -∫_T ∂φ/∂x_c for the two velocity components
            b.push(tri[k], q, -area * g[k][0]);
            b.push(n + tri[k], q, -area * g[k][1]);
        }
        let l = local_strain(g);
        let dofs = local_dofs(tri, n);
        for (c, row) in l.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    e.push(c * m + t, dofs[k], v);
                }
            }
        }
    }
    let m_sca = mass.finalize();
    let a_sca = stiff.finalize();

    let mut gamma = TripletBuilder::new(n, n);
    for edge in &mesh.boundary_edges_gamma {
        let [i, j] = edge.nodes;
        let len = edge.length;
        gamma.push(i, i, len / 3.0);
        gamma.push(j, j, len / 3.0);
        gamma.push(i, j, len / 6.0);
        gamma.push(j, i, len / 6.0);
    }

    let boundary = mesh.boundary_mask();
    let velocity_fixed = boundary.iter().chain(boundary.iter()).copied().collect();

    AssembledOperators {
        m_vec: m_sca.block_diag2(),
        k_vec: a_sca.block_diag2(),
        m_sca,
        a_sca,
        m_gamma: gamma.finalize(),
        b: b.finalize(),
        e: e.finalize(),
        tri_weights: mesh.tri_area.clone(),
        grads,
        velocity_fixed,
    }
}

/// Strain operator alone (same as `assemble_constant_operators(mesh).e`).
pub fn strain_operator(mesh: &Mesh) -> SparseMatrix {
    let n = mesh.n_nodes();
    let m = mesh.n_triangles();
    let grads = basis_gradients(mesh);
    let mut e = TripletBuilder::with_capacity(4 * m, 2 * n, 12 * m);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let l = local_strain(&grads[t]);
        let dofs = local_dofs(tri, n);
        for (c, row) in l.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    e.push(c * m + t, dofs[k], v);
                }
            }
        }
    }
    e.finalize()
}

fn check_len(v: &[f64], expected: usize) -> Result<(), AssemblyError> {
    if v.len() != expected {
        return Err(AssemblyError::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// Pressure modes outside the range of the no-slip divergence operator, as
/// functionals to pin: the area-weighted mean and the quad checkerboard.
/// Both leave every cross-grid velocity divergence-free.
pub fn pressure_constraints(mesh: &Mesh) -> Vec<Vec<f64>> {
    let mean = mesh.quad_area.clone();
    let checker = (0..mesh.n_quads())
        .map(|q| {
            let (i, j) = (q % mesh.nx, q / mesh.nx);
            if (i + j) % 2 == 0 {
                mesh.quad_area[q]
            } else {
                -mesh.quad_area[q]
            }
        })
        .collect();
    vec![mean, checker]
}

/// Arithmetic mean of a nodal field over each triangle's vertices.
pub fn triangle_average(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles.iter().map(|&[a, b, c]| (nodal[a] + nodal[b] + nodal[c]) / 3.0).collect()
}

/// `μ_T`: viscosity evaluated at the vertex-averaged temperature.
pub fn viscosity_on_triangles(mesh: &Mesh, theta: &[f64], params: &PhysicalParams) -> Result<Vec<f64>, AssemblyError> {
    check_len(theta, mesh.n_nodes())?;
    let mu: Vec<f64> = triangle_average(mesh, theta).into_iter().map(|th| params.viscosity(th)).collect();
    if let Some((t, &v)) = mu.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(AssemblyError::NonPositiveViscosity { triangle: t, value: v });
    }
    Ok(mu)
}

/// Diagonal of `D_w`: `w_T |T|` repeated over the four strain blocks.
pub fn strain_weight_diagonal(mesh: &Mesh, weights: &[f64]) -> Vec<f64> {
    let m = mesh.n_triangles();
    (0..4 * m).map(|i| weights[i % m] * mesh.tri_area[i % m]).collect()
}

/// `A_μ(θ)ᵢⱼ = Σ_T μ_T |T| (Eφᵢ : Eφⱼ)`, assembled triangle by triangle.
pub fn assemble_weighted_viscosity(
    mesh: &Mesh,
    ops: &AssembledOperators,
    theta: &[f64],
    params: &PhysicalParams,
) -> Result<SparseMatrix, AssemblyError> {
    let mu = viscosity_on_triangles(mesh, theta, params)?;
    Ok(weighted_viscosity_from_triangles(mesh, ops, &mu))
}

pub fn weighted_viscosity_from_triangles(mesh: &Mesh, ops: &AssembledOperators, mu: &[f64]) -> SparseMatrix {
    let n = mesh.n_nodes();
    let mut a = TripletBuilder::with_capacity(2 * n, 2 * n, 36 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let l = local_strain(&ops.grads[t]);
        let dofs = local_dofs(tri, n);
        let w = mu[t] * mesh.tri_area[t];
        for i in 0..6 {
            for j in 0..6 {
                let v: f64 = (0..4).map(|c| l[c][i] * l[c][j]).sum();
                if v != 0.0 {
                    a.push(dofs[i], dofs[j], w * v);
                }
            }
        }
    }
    a.finalize()
}

/// `Q_g(θ)ᵢⱼ = Σ_T g_T |T| (ψⱼ : Eφᵢ)` (2n×4m).
pub fn assemble_multiplier_coupling(
    mesh: &Mesh,
    ops: &AssembledOperators,
    theta: &[f64],
    params: &PhysicalParams,
) -> Result<SparseMatrix, AssemblyError> {
    let g = crate::huber::yield_on_triangles(mesh, theta, params)?;
    Ok(multiplier_coupling_from_triangles(mesh, ops, &g))
}

pub fn multiplier_coupling_from_triangles(mesh: &Mesh, ops: &AssembledOperators, g: &[f64]) -> SparseMatrix {
    let n = mesh.n_nodes();
    let m = mesh.n_triangles();
    let mut q = TripletBuilder::with_capacity(2 * n, 4 * m, 12 * m);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let l = local_strain(&ops.grads[t]);
        let dofs = local_dofs(tri, n);
        let w = g[t] * mesh.tri_area[t];
        for (c, row) in l.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    q.push(dofs[k], c * m + t, w * v);
                }
            }
        }
    }
    q.finalize()
}

/// Edge-midpoint rule on a triangle: `(local vertex pair, weight / |T|)`.
const EDGE_MIDPOINTS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

/// `C(w)ᵢⱼ = ∫ (w·∇φⱼ) φᵢ` for P1 scalar trial/test functions, with the
/// (exact) edge-midpoint rule.
pub fn assemble_convection_scalar(mesh: &Mesh, ops: &AssembledOperators, w: &[f64]) -> SparseMatrix {
    let n = mesh.n_nodes();
    assert_eq!(w.len(), 2 * n, "convection field must have length 2n");
    let mut c = TripletBuilder::with_capacity(n, n, 9 * mesh.n_triangles());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let g = &ops.grads[t];
        let area = mesh.tri_area[t];
        for pair in EDGE_MIDPOINTS {
            let (a, b) = (tri[pair[0]], tri[pair[1]]);
            let wx = 0.5 * (w[a] + w[b]);
            let wy = 0.5 * (w[n + a] + w[n + b]);
            if wx == 0.0 && wy == 0.0 {
                continue;
            }
            for j in 0..3 {
                let adv = wx * g[j][0] + wy * g[j][1];
                // φᵢ = 1/2 at the midpoint for the edge's two vertices, 0 otherwise
                for &i in &pair {
                    c.push(tri[i], tri[j], area / 3.0 * 0.5 * adv);
                }
            }
        }
    }
    c.finalize()
}

/// `C(w)` acting on both velocity components.
pub fn assemble_convection_vector(mesh: &Mesh, ops: &AssembledOperators, w: &[f64]) -> SparseMatrix {
    assemble_convection_scalar(mesh, ops, w).block_diag2()
}

/// Per-triangle Euclidean norm of the four strain components of `E u`.
pub fn strain_norms(ops: &AssembledOperators, u: &[f64]) -> Vec<f64> {
    let eu = ops.e.mul_vec(u);
    crate::huber::triangle_norms(&eu)
}

/// Weighted mass matrices and vectors of the viscous-plastic dissipation.
#[derive(Debug, Clone)]
pub struct Dissipation {
    /// Mass matrix weighted by `‖Eu‖_T`.
    pub m1: SparseMatrix,
    /// Mass matrix weighted by `‖Eu‖²_T`.
    pub m2: SparseMatrix,
    /// `Σ_T |T|/6 ‖Eu‖_T` per node.
    pub th1: Vec<f64>,
    /// `Σ_T |T|/6 ‖Eu‖²_T` per node.
    pub th2: Vec<f64>,
}

pub fn assemble_dissipation(mesh: &Mesh, ops: &AssembledOperators, u: &[f64]) -> Dissipation {
    let n = mesh.n_nodes();
    let norms = strain_norms(ops, u);
    let mut m1 = TripletBuilder::with_capacity(n, n, 9 * mesh.n_triangles());
    let mut m2 = TripletBuilder::with_capacity(n, n, 9 * mesh.n_triangles());
    let mut th1 = vec![0.0; n];
    let mut th2 = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let w1 = norms[t];
        if w1 == 0.0 {
            continue;
        }
        let w2 = w1 * w1;
        let area = mesh.tri_area[t];
        for i in 0..3 {
            th1[tri[i]] += area / 6.0 * w1;
            th2[tri[i]] += area / 6.0 * w2;
            for j in 0..3 {
                let mij = if i == j { area / 6.0 } else { area / 12.0 };
                m1.push(tri[i], tri[j], w1 * mij);
                m2.push(tri[i], tri[j], w2 * mij);
            }
        }
    }
    Dissipation { m1: m1.finalize(), m2: m2.finalize(), th1, th2 }
}

/// Six-point symmetric rule, exact for polynomials of degree 4:
/// `(barycentric a, weight / |T|)` with points `(a, a, 1-2a)` and permutations.
const DUNAVANT4: [(f64, f64); 2] = [(0.445_948_490_915_965, 0.223_381_589_678_011), (0.091_576_213_509_771, 0.109_951_743_655_322)];

fn quadrature_points(mesh: &Mesh, t: usize) -> impl Iterator<Item = ([f64; 3], f64)> + '_ {
    let area = mesh.tri_area[t];
    DUNAVANT4.iter().flat_map(move |&(a, w)| {
        let b = 1.0 - 2.0 * a;
        [[a, a, b], [a, b, a], [b, a, a]].into_iter().map(move |bary| (bary, w * area))
    })
}

fn physical_point(mesh: &Mesh, t: usize, bary: &[f64; 3]) -> [f64; 2] {
    let tri = mesh.triangles[t];
    let mut p = [0.0; 2];
    for k in 0..3 {
        p[0] += bary[k] * mesh.nodes[tri[k]][0];
        p[1] += bary[k] * mesh.nodes[tri[k]][1];
    }
    p
}

/// `∫ s φᵢ` for a scalar source.
pub fn scalar_load<F: Fn([f64; 2]) -> f64>(mesh: &Mesh, source: F) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (bary, w) in quadrature_points(mesh, t) {
            let s = source(physical_point(mesh, t, &bary));
            for k in 0..3 {
                load[tri[k]] += w * s * bary[k];
            }
        }
    }
    load
}

/// `∫ f·φᵢ` for a vector source, blockwise layout.
pub fn vector_load<F: Fn([f64; 2]) -> [f64; 2]>(mesh: &Mesh, source: F) -> Vec<f64> {
    let n = mesh.n_nodes();
    let mut load = vec![0.0; 2 * n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for (bary, w) in quadrature_points(mesh, t) {
            let f = source(physical_point(mesh, t, &bary));
            for k in 0..3 {
                load[tri[k]] += w * f[0] * bary[k];
                load[n + tri[k]] += w * f[1] * bary[k];
            }
        }
    }
    load
}

/// Rotational body force `f(x₁, x₂) = 300 (x₂ - 1/2, 1/2 - x₁)`.
pub fn body_force(x: [f64; 2]) -> [f64; 2] {
    [300.0 * (x[1] - 0.5), 300.0 * (0.5 - x[0])]
}

/// Load vector of [`body_force`]; the force is constant in time so `_t` is
/// only carried for the time-dependent call sites.
pub fn body_force_vector(mesh: &Mesh, _t: f64) -> Vec<f64> {
    vector_load(mesh, body_force)
}

/// Nodal interpolant of a vector field.
pub fn interpolate_vector<F: Fn([f64; 2]) -> [f64; 2]>(mesh: &Mesh, field: F) -> Vec<f64> {
    let n = mesh.n_nodes();
    let mut v = vec![0.0; 2 * n];
    for (i, &p) in mesh.nodes.iter().enumerate() {
        let f = field(p);
        v[i] = f[0];
        v[n + i] = f[1];
    }
    v
}

/// Nodal interpolant of a scalar field.
pub fn interpolate_scalar<F: Fn([f64; 2]) -> f64>(mesh: &Mesh, field: F) -> Vec<f64> {
    mesh.nodes.iter().map(|&p| field(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cross_grid;

    fn unit(nx: usize) -> (Mesh, AssembledOperators) {
        let mesh = build_cross_grid(nx, nx, 1.0, 1.0).unwrap();
        let ops = assemble_constant_operators(&mesh);
        (mesh, ops)
    }

    fn params(mu0: f64, delta_mu: f64, g0: f64, delta_g: f64) -> PhysicalParams {
        PhysicalParams { mu0, delta_mu, g0, delta_g, kappa: 1.0, cp: 1.0, alpha: 0.0, beta: 0.0 }
    }

    #[test]
    fn pressure_constraints_span_divergence_kernel() {
        for (nx, ny) in [(2, 2), (3, 5), (4, 4)] {
            let mesh = build_cross_grid(nx, ny, 1.0, 1.0).unwrap();
            let ops = assemble_constant_operators(&mesh);
            let b = ops.b.zero_rows(&ops.velocity_fixed);
            for c in pressure_constraints(&mesh) {
                // quad areas are uniform, so the functional doubles as the mode
                assert!(crate::linalg::norm_inf(&b.mul_vec(&c)) < 1e-14);
            }
        }
    }

    #[test]
    fn single_triangle_mass_entries() {
        let (mesh, ops) = unit(1);
        // node 0 belongs to two triangles (bottom, left), node 1 to two (bottom, right)
        let area = mesh.tri_area[0];
        assert!((area - 0.25).abs() < 1e-15);
        // off-diagonal between vertices 0 and 1 only shared by the bottom triangle
        assert!((ops.m_sca.get(0, 1) - area / 12.0).abs() < 1e-15);
        // the center node is in all four triangles
        assert!((ops.m_sca.get(4, 4) - 4.0 * area / 6.0).abs() < 1e-15);
        let total: f64 = ops.m_sca.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_kernel_is_constants() {
        let (_, ops) = unit(3);
        let ones = vec![1.0; ops.n_nodes()];
        assert!(ops.a_sca.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(ops.a_sca.is_symmetric(1e-14));
    }

    #[test]
    fn robin_mass_integrates_one_over_gamma() {
        let (mesh, ops) = unit(4);
        let ones = vec![1.0; mesh.n_nodes()];
        let row_sums = ops.m_gamma.mul_vec(&ones);
        let total: f64 = row_sums.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for (i, &s) in row_sums.iter().enumerate() {
            if !mesh.boundary_nodes_gamma.contains(&i) {
                assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn strain_of_linear_fields() {
        let (mesh, ops) = unit(3);
        let m = mesh.n_triangles();
        let stretch = interpolate_vector(&mesh, |p| [p[0], 0.0]);
        let eu = ops.e.mul_vec(&stretch);
        for t in 0..m {
            let comps = [eu[t], eu[m + t], eu[2 * m + t], eu[3 * m + t]];
            for (c, e) in comps.iter().zip([1.0, 0.0, 0.0, 0.0]) {
                assert!((c - e).abs() < 1e-12);
            }
        }
        let shear = interpolate_vector(&mesh, |p| [p[1], p[0]]);
        let eu = ops.e.mul_vec(&shear);
        for t in 0..m {
            let comps = [eu[t], eu[m + t], eu[2 * m + t], eu[3 * m + t]];
            for (c, e) in comps.iter().zip([0.0, 1.0, 1.0, 0.0]) {
                assert!((c - e).abs() < 1e-12);
            }
        }
        let rotation = interpolate_vector(&mesh, |p| [-p[1], p[0]]);
        assert!(ops.e.mul_vec(&rotation).iter().all(|v| v.abs() < 1e-12));
        assert_eq!(strain_operator(&mesh), ops.e);
    }

    #[test]
    fn weighted_viscosity_constant_theta() {
        let (mesh, ops) = unit(2);
        let theta = vec![0.0; mesh.n_nodes()];
        let a = assemble_weighted_viscosity(&mesh, &ops, &theta, &params(2.0, 0.5, 0.0, 0.0)).unwrap();
        let d = strain_weight_diagonal(&mesh, &vec![1.0; mesh.n_triangles()]);
        let reference = ops.e.transpose().matmul(&ops.e.scale(Some(&d), None));
        assert!(a.max_abs_diff(&SparseMatrix::linear_combination(&[(2.0, &reference)])) < 1e-12);
    }

    #[test]
    fn vertex_averaged_parameters() {
        let mesh = build_cross_grid(1, 1, 1.0, 1.0).unwrap();
        let mut theta = vec![0.0; 5];
        let [a, b, c] = mesh.triangles[0];
        theta[a] = 0.0;
        theta[b] = 0.5;
        theta[c] = 1.0;
        let mu = viscosity_on_triangles(&mesh, &theta, &params(1.0, 0.5, 10.0, 8.0)).unwrap();
        assert!((mu[0] - 1.25).abs() < 1e-15);
        let g = crate::huber::yield_on_triangles(&mesh, &theta, &params(1.0, 0.5, 10.0, 8.0)).unwrap();
        assert!((g[0] - 14.0).abs() < 1e-14);

        let ones = vec![1.0; 5];
        let mu = viscosity_on_triangles(&mesh, &ones, &params(1.5, -0.5, 18.0, -8.0)).unwrap();
        assert!(mu.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn rejects_non_positive_viscosity() {
        let (mesh, ops) = unit(1);
        let theta = vec![3.0; mesh.n_nodes()];
        let err = assemble_weighted_viscosity(&mesh, &ops, &theta, &params(1.0, -0.5, 1.0, 0.0)).unwrap_err();
        assert!(matches!(err, AssemblyError::NonPositiveViscosity { .. }));
        let err = assemble_multiplier_coupling(&mesh, &ops, &theta, &params(1.0, 0.0, 1.0, -1.0)).unwrap_err();
        assert!(matches!(err, AssemblyError::NegativeYield { .. }));
    }

    #[test]
    fn multiplier_coupling_pairing() {
        let (mesh, ops) = unit(2);
        let m = mesh.n_triangles();
        let n = mesh.n_nodes();
        let theta: Vec<f64> = (0..n).map(|i| (i as f64 * 0.31).sin().abs()).collect();
        let p = params(1.0, 0.0, 10.0, 8.0);
        let qg = assemble_multiplier_coupling(&mesh, &ops, &theta, &p).unwrap();
        let v: Vec<f64> = (0..2 * n).map(|i| (i as f64 * 0.7).cos()).collect();
        let q: Vec<f64> = (0..4 * m).map(|i| (i as f64 * 1.3).sin()).collect();
        let lhs = crate::linalg::dot(&qg.mul_vec(&q), &v);
        let ev = ops.e.mul_vec(&v);
        let g = crate::huber::yield_on_triangles(&mesh, &theta, &p).unwrap();
        let rhs: f64 = (0..m)
            .map(|t| g[t] * mesh.tri_area[t] * (0..4).map(|c| q[c * m + t] * ev[c * m + t]).sum::<f64>())
            .sum();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn convection_zero_field() {
        let (mesh, ops) = unit(2);
        let w = vec![0.0; 2 * mesh.n_nodes()];
        assert_eq!(assemble_convection_vector(&mesh, &ops, &w).nnz(), 0);
        assert_eq!(assemble_convection_scalar(&mesh, &ops, &w).nnz(), 0);
    }

    #[test]
    fn convection_of_linear_field_integrates_exactly() {
        let (mesh, ops) = unit(3);
        let n = mesh.n_nodes();
        let w = interpolate_vector(&mesh, |_| [1.0, 0.0]);
        let ones = vec![1.0; n];
        let theta = interpolate_scalar(&mesh, |p| p[0]);
        let cs = assemble_convection_scalar(&mesh, &ops, &w);
        let integral = crate::linalg::dot(&cs.mul_vec(&theta), &ones);
        assert!((integral - 1.0).abs() < 1e-12);

        let cv = assemble_convection_vector(&mesh, &ops, &w);
        let v = interpolate_vector(&mesh, |p| [p[0], 0.0]);
        let total: f64 = cv.mul_vec(&v).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn convection_rows_are_local() {
        let (mesh, ops) = unit(3);
        let w = interpolate_vector(&mesh, |p| [p[1], -p[0]]);
        let cs = assemble_convection_scalar(&mesh, &ops, &w);
        let mut neighbours = vec![std::collections::BTreeSet::new(); mesh.n_nodes()];
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    neighbours[a].insert(b);
                }
            }
        }
        for (r, c, _) in cs.triplets() {
            assert!(neighbours[r].contains(&c));
        }
    }

    #[test]
    fn dissipation_of_unit_stretch() {
        let (mesh, ops) = unit(3);
        let u = interpolate_vector(&mesh, |p| [p[0], 0.0]);
        let d = assemble_dissipation(&mesh, &ops, &u);
        assert!(d.m1.max_abs_diff(&ops.m_sca) < 1e-12);
        assert!(d.m2.max_abs_diff(&d.m1) < 1e-12);
        assert!((d.th1.iter().sum::<f64>() - 0.5).abs() < 1e-12);
        assert!((d.th2.iter().sum::<f64>() - 0.5).abs() < 1e-12);

        let zero = vec![0.0; 2 * mesh.n_nodes()];
        let d = assemble_dissipation(&mesh, &ops, &zero);
        assert_eq!(d.m1.nnz() + d.m2.nnz(), 0);
        assert!(d.th1.iter().chain(&d.th2).all(|&v| v == 0.0));
    }

    #[test]
    fn body_force_values_and_balance() {
        assert_eq!(body_force([0.5, 0.5]), [0.0, 0.0]);
        assert_eq!(body_force([1.0, 0.5]), [0.0, -150.0]);
        let mesh = build_cross_grid(4, 4, 1.0, 1.0).unwrap();
        let f = body_force_vector(&mesh, 0.0);
        let n = mesh.n_nodes();
        let fx: f64 = f[..n].iter().sum();
        let fy: f64 = f[n..].iter().sum();
        assert!(fx.abs() < 1e-12 && fy.abs() < 1e-12);
    }

    #[test]
    fn divergence_coupling_annihilates_constants() {
        let (mesh, ops) = unit(3);
        let ones = vec![1.0; mesh.n_quads()];
        let bp = ops.b.mul_vec(&ones);
        for (i, v) in bp.iter().enumerate() {
            if !ops.velocity_fixed[i] {
                assert!(v.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn validate_rejects_bad_laws() {
        assert!(params(-1.0, 0.0, 1.0, 0.0).validate().is_err());
        assert!(params(1.0, -1.0, 1.0, 0.0).validate().is_err());
        assert!(params(1.0, 0.0, 1.0, -2.0).validate().is_err());
        assert!(params(1.5, -0.5, 18.0, -8.0).validate().is_ok());
    }
}
