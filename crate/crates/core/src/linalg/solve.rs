use alloc::vec::Vec;

use super::matrix::{kron, DenseMatrix};
use crate::{Error, Result};

/// Relative residual target of [`solve_linear`].
pub const LIN_TOL: f64 = 1e-10;
/// Relative residual target of [`lyapunov_solve`].
pub const LYAP_TOL: f64 = 1e-10;

/// LU factorization with partial pivoting, `PA = LU`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidArgument(alloc::format!(
                "LU needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = m.max_abs() * f64::EPSILON * n as f64;

        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, lu[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= threshold || pivot_abs == 0.0 {
                return Err(Error::Singular);
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for r in (k + 1)..n {
                let f = lu[r * n + k] / pivot;
                lu[r * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[r * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(b.rows(), self.n, "right-hand side rows");
        let mut out = DenseMatrix::zeros(b.rows(), b.cols());
        let mut col = alloc::vec![0.0; b.rows()];
        for j in 0..b.cols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            for (i, v) in self.solve(&col).into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Solves `M x = b` by partial-pivot elimination with one step of
/// iterative refinement.
pub fn solve_linear(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.rows() {
        return Err(Error::InvalidArgument(alloc::format!(
            "right-hand side has length {}, matrix has {} rows",
            b.len(),
            m.rows()
        )));
    }
    let lu = Lu::factor(m)?;
    let mut x = lu.solve(b);
    let r: Vec<f64> = m.mul_vec(&x)?.iter().zip(b).map(|(mx, bi)| bi - mx).collect();
    let dx = lu.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear solve"));
    }
    Ok(x)
}

/// Solves `FᵀX + XF + Q = 0` for symmetric `X`.
///
/// Uses the vectorized form `(I ⊗ Fᵀ + Fᵀ ⊗ I)·vec(X) = −vec(Q)` with
/// column-major `vec`. The operator is singular exactly when two eigenvalues
/// of `F` sum to zero; that is reported as [`Error::NoLyapunovSolution`].
pub fn lyapunov_solve(f: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    if !f.is_square() || !q.is_square() || f.rows() != q.rows() {
        return Err(Error::InvalidArgument(alloc::format!(
            "Lyapunov solve needs square F and Q of equal size, got {}x{} and {}x{}",
            f.rows(),
            f.cols(),
            q.rows(),
            q.cols()
        )));
    }
    let n = f.rows();
    let ft = f.transpose();
    let ident = DenseMatrix::identity(n);
    let op = &kron(&ident, &ft) + &kron(&ft, &ident);

    let mut rhs = alloc::vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            rhs[j * n + i] = -q[(i, j)];
        }
    }
    let vec_x = match solve_linear(&op, &rhs) {
        Ok(x) => x,
        Err(Error::Singular) => return Err(Error::NoLyapunovSolution),
        Err(e) => return Err(e),
    };
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            x[(i, j)] = vec_x[j * n + i];
        }
    }
    let x = x.symmetrize();

    let residual = (&(&(&ft * &x) + &(&x * f)) + q).frobenius_norm();
    let scale = 2.0 * f.frobenius_norm() * x.frobenius_norm() + q.frobenius_norm();
    if residual > LYAP_TOL * scale.max(1.0) {
        return Err(Error::NoLyapunovSolution);
    }
    Ok(x)
}
