use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq)]
#[non_exhaustive]
pub enum Error {
    /// Shapes or arguments are inconsistent with the operation.
    InvalidArgument(String),
    /// A matrix entry or intermediate result is NaN or infinite.
    NonFinite(&'static str),
    /// Relative asymmetry of a matrix that must be symmetric.
    NotSymmetric { asymmetry: f64 },
    /// An iterative method ran out of iterations.
    NoConvergence { method: &'static str, iterations: usize },
    /// A linear system is singular to working precision.
    Singular,
    /// The Lyapunov equation has no unique solution (operator singular).
    NoLyapunovSolution,
    /// The signed graph is not structurally balanced; `cycle` lists the
    /// vertices of a cycle with an odd number of negative edges.
    NotBalanced { cycle: Vec<usize> },
    /// The unsigned graph is disconnected (or the Laplacian has a
    /// multi-dimensional kernel).
    NotConnected,
    InvalidLaplacian(String),
    InvalidInput(String),
    /// The candidate `P` is not symmetric positive definite.
    InvalidP { min_eigenvalue: f64 },
    /// `AᵀP + PA − αPBBᵀP` is not negative definite.
    LmiViolated { lambda_max: f64 },
    /// No stabilizing initial gain could be supplied or found.
    NotStabilizable,
    /// The Young weight `c` leaves no decay margin (`c·m² ≥ κ`).
    InvalidC { c: f64, kappa: f64, coupling_norm: f64 },
    /// A trigger weight exceeds the admissible budget and was not forced.
    BetaTooLarge { agent: usize, beta: f64, bound: f64 },
    /// The integrator produced a non-finite state.
    NumericBlowup { t: f64, agent: usize },
    NumericFailure(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to invalid input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NoConvergence { .. }
                | Error::Singular
                | Error::NoLyapunovSolution
                | Error::NumericBlowup { .. }
                | Error::NumericFailure(_)
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NotSymmetric { asymmetry } => {
                write!(f, "matrix is not symmetric (relative asymmetry {asymmetry:e})")
            }
            Error::NoConvergence { method, iterations } => {
                write!(f, "{method} did not converge after {iterations} iterations")
            }
            Error::Singular => f.write_str("matrix is singular to working precision"),
            Error::NoLyapunovSolution => {
                f.write_str("Lyapunov equation has no unique solution (matrix not Hurwitz)")
            }
            Error::NotBalanced { cycle } => {
                f.write_str("graph is not structurally balanced: cycle with an odd number of negative edges through vertices [")?;
                for (i, v) in cycle.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Error::NotConnected => f.write_str("graph is not connected"),
            Error::InvalidLaplacian(msg) => write!(f, "invalid Laplacian: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidP { min_eigenvalue } => write!(
                f,
                "P is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
            ),
            Error::LmiViolated { lambda_max } => write!(
                f,
                "gain inequality violated: largest eigenvalue of AᵀP+PA−αPBBᵀP is {lambda_max:e} (must be < 0)"
            ),
            Error::NotStabilizable => f.write_str("no stabilizing initial gain found"),
            Error::InvalidC { c, kappa, coupling_norm } => write!(
                f,
                "c = {c:e} leaves no margin: c·m² ≥ κ with m = {coupling_norm:e}, κ = {kappa:e}"
            ),
            Error::BetaTooLarge { agent, beta, bound } => write!(
                f,
                "beta for agent {agent} is {beta:e}, above the admissible bound {bound:e} (set force_beta to override)"
            ),
            Error::NumericBlowup { t, agent } => {
                write!(f, "non-finite state for agent {agent} at t = {t}")
            }
            Error::NumericFailure(msg) => write!(f, "numeric failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
