//! Dense linear algebra for the small systems handled here (a few dozen
//! agents, state dimension up to ~16).
//!
//! All routines are pure functions of their inputs.

mod eigen;
mod expm;
mod matrix;
mod solve;

pub use eigen::{operator_norm, sym_eigen, SymEigen, EIG_TOL, MAX_SWEEPS, SYM_TOL};
pub use expm::{mat_exp, PADE_ORDER};
pub use matrix::{kron, DenseMatrix};
pub use solve::{lyapunov_solve, solve_linear, Lu, LIN_TOL, LYAP_TOL};

/// Euclidean norm of a vector.
pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum::<f64>())
}

#[inline]
pub(crate) fn sq(v: f64) -> f64 {
    v * v
}
