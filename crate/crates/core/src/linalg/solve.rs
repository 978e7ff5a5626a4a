use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::sparse::{dot, norm2, SparseMatrix, TripletBuilder};
use super::LinalgError;

/// Relative tolerance of every linear solve.
pub const LINEAR_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

fn to_faer(a: &SparseMatrix) -> Result<SparseColMat<usize, f64>, LinalgError> {
    let triplets: Vec<_> = a.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(a.rows(), a.cols(), &triplets)
        .map_err(|e| LinalgError::Backend(format!("{e:?}")))
}

fn column(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

fn check_square(a: &SparseMatrix, b: &[f64]) -> Result<(), LinalgError> {
    if a.rows() != a.cols() || a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "matrix {}x{}, rhs {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    Ok(())
}

/// Solves with a factorization `solve`, then refines against `a` until the
/// residual drops below the linear tolerance.
fn refine<F: Fn(&[f64]) -> Vec<f64>>(a: &SparseMatrix, b: &[f64], solve: F) -> Result<Vec<f64>, LinalgError> {
    let mut x = solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::SingularSystem);
    }
    let target = LINEAR_TOL * (norm2(b) + 1.0);
    for _ in 0..REFINEMENT_STEPS {
        let r = residual(a, &x, b);
        if norm2(&r) <= target {
            break;
        }
        let dx = solve(&r);
        if dx.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::SingularSystem);
        }
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
    }
    Ok(x)
}

/// Sparse Cholesky solve for a symmetric positive definite matrix.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_square(a, b)?;
    let llt = to_faer(a)?.sp_cholesky(Side::Lower).map_err(|e| match e {
        faer::sparse::linalg::LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot {
            index,
        }) => LinalgError::NonPositivePivot { index },
        other => LinalgError::Backend(format!("{other:?}")),
    })?;
    refine(a, b, |rhs| llt.solve(&column(rhs)).col(0).iter().copied().collect())
}

/// Sparse LU solve with partial pivoting.
pub fn solve_general(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    check_square(a, b)?;
    let lu = to_faer(a)?.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { .. } => LinalgError::SingularSystem,
        other => LinalgError::Backend(format!("{other:?}")),
    })?;
    refine(a, b, |rhs| lu.solve(&column(rhs)).col(0).iter().copied().collect())
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_cg(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError> {
    check_square(a, b)?;
    let n = b.len();
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let target = tol * (norm2(b) + 1.0);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if norm2(&r) <= target {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::NonPositivePivot { index: 0 });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm2(&r);
        if res <= target {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NonConvergence { iterations: max_iter, residual: norm2(&r) })
}

/// Velocity–pressure saddle system
///
/// ```text
/// [ A   B  0 ] [u]   [rhs_u]
/// [ Bᵀ  0  C ] [p] = [rhs_p]
/// [ 0   Cᵀ 0 ] [λ]   [  0  ]
/// ```
///
/// The columns of `C` are the `constraints`: pressure functionals forced to
/// zero, one per mode of the kernel of `B` (e.g. the area-weighted mean).
/// Each `λ` absorbs the matching component of `rhs_p`.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a_block: SparseMatrix,
    pub b_block: SparseMatrix,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
}

impl SaddleSystem {
    fn validate(&self) -> Result<(), LinalgError> {
        let nu = self.a_block.rows();
        let np = self.b_block.cols();
        if self.a_block.cols() != nu
            || self.b_block.rows() != nu
            || self.rhs_u.len() != nu
            || self.rhs_p.len() != np
            || self.constraints.iter().any(|c| c.len() != np)
        {
            return Err(LinalgError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, rhs_u {}, rhs_p {}",
                self.a_block.rows(),
                self.a_block.cols(),
                self.b_block.rows(),
                self.b_block.cols(),
                self.rhs_u.len(),
                self.rhs_p.len(),
            )));
        }
        Ok(())
    }

    /// The assembled `(nu + np + nc)`-square matrix.
    pub fn full_matrix(&self) -> SparseMatrix {
        let nu = self.a_block.rows();
        let np = self.b_block.cols();
        let nc = self.constraints.len();
        let dim = nu + np + nc;
        let mut t = TripletBuilder::with_capacity(dim, dim, self.a_block.nnz() + 2 * self.b_block.nnz() + 2 * nc * np);
        for (r, c, v) in self.a_block.triplets() {
            t.push(r, c, v);
        }
        for (r, c, v) in self.b_block.triplets() {
            t.push(r, nu + c, v);
            t.push(nu + c, r, v);
        }
        for (k, row) in self.constraints.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                t.push(nu + j, nu + np + k, w);
                t.push(nu + np + k, nu + j, w);
            }
        }
        t.finalize()
    }

    pub fn full_rhs(&self) -> Vec<f64> {
        let mut rhs = Vec::with_capacity(self.rhs_u.len() + self.rhs_p.len() + self.constraints.len());
        rhs.extend_from_slice(&self.rhs_u);
        rhs.extend_from_slice(&self.rhs_p);
        rhs.extend(std::iter::repeat(0.0).take(self.constraints.len()));
        rhs
    }
}

pub fn solve_saddle(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>), LinalgError> {
    sys.validate()?;
    let nu = sys.a_block.rows();
    let np = sys.b_block.cols();
    let x = solve_general(&sys.full_matrix(), &sys.full_rhs())?;
    Ok((x[..nu].to_vec(), x[nu..nu + np].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, h: f64) -> SparseMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0 / h);
            if i > 0 {
                t.push(i, i - 1, -1.0 / h);
            }
            if i + 1 < n {
                t.push(i, i + 1, -1.0 / h);
            }
        }
        t.finalize()
    }

    /// Plain Gaussian elimination with partial pivoting.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }

    #[test]
    fn identity_solve() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_spd(&SparseMatrix::identity(3), &b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let a = SparseMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = solve_spd(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let x = solve_general(&a, &[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_d_poisson_matches_dense() {
        // -u'' = 1 on (0,1), 3 interior nodes, h = 0.25, load M·1 with lumped rows h
        let h = 0.25;
        let a = laplacian_1d(3, h);
        let b = vec![h; 3];
        let x = solve_spd(&a, &b).unwrap();
        let reference = dense_solve(a.to_dense(), b.clone());
        for (xi, ri) in x.iter().zip(&reference) {
            assert!((xi - ri).abs() < 1e-13);
        }
        // P1 is nodally exact for this problem: u = x(1-x)/2
        for (i, xi) in x.iter().enumerate() {
            let s = (i + 1) as f64 * h;
            assert!((xi - s * (1.0 - s) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_is_rejected_by_cholesky() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(LinalgError::NonPositivePivot { .. })));
    }

    #[test]
    fn singular_is_reported() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(solve_general(&a, &[1.0, 2.0]), Err(LinalgError::SingularSystem)));
    }

    #[test]
    fn cg_matches_direct_on_spd() {
        let a = laplacian_1d(50, 0.02).add_scaled(1.0, &SparseMatrix::identity(50), 3.0);
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = solve_spd(&a, &b).unwrap();
        let x2 = solve_cg(&a, &b, 1e-13, 500).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-8);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = laplacian_1d(200, 0.005);
        let b = vec![1.0; 200];
        assert!(matches!(solve_cg(&a, &b, 1e-14, 3), Err(LinalgError::NonConvergence { iterations: 3, .. })));
    }

    #[test]
    fn saddle_with_pressure_kernel() {
        // B has the pressure mode (1, -1) in its kernel; the constraint removes it
        let sys = SaddleSystem {
            a_block: SparseMatrix::identity(2),
            b_block: SparseMatrix::from_dense(2, 2, &[1.0, 1.0, 0.0, 0.0]),
            rhs_u: vec![3.0, 2.0],
            rhs_p: vec![1.0, 1.0],
            constraints: vec![vec![1.0, -1.0]],
        };
        let (u, p) = solve_saddle(&sys).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12 && (u[1] - 2.0).abs() < 1e-12);
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);

        let unconstrained = SaddleSystem { constraints: vec![], ..sys };
        assert!(solve_saddle(&unconstrained).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve_general(&SparseMatrix::identity(2), &[1.0]),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }
}
