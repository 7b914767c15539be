//! Integral-type event-triggered bipartite consensus for linear multi-agent
//! systems on structurally balanced signed graphs.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`linalg`]: a small dense linear-algebra kit (matrix exponential,
//!   Jacobi eigensolver, Kronecker products, linear and Lyapunov solves);
//! * [`graph`]: signed Laplacians, structural balance and the gauge
//!   transformation, algebraic connectivity;
//! * [`design`]: gain verification/synthesis (`K = BᵀP`) and the derived
//!   parameter chain with analytic minimum inter-event time bounds;
//! * [`trigger`]: the distributed control law and integral trigger;
//! * [`sim`]: fixed-step RK4 hybrid simulation with bisection event
//!   localization;
//! * [`metrics`]: bipartite error, Lyapunov value, inter-event statistics and
//!   the runtime monitors built on them.
//!
//! File formats, scenario loading and the command line live in the `etc-sim`
//! companion crate.
#![no_std]
#![deny(missing_debug_implementations, rust_2018_idioms)]
// `!(x > y)` is used on purpose so NaN fails every validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod design;
mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod sim;
pub mod trigger;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
