//! Distributed control law and the integral event trigger.
//!
//! Everything is evaluated in the original coordinates `x`. The gauge
//! transformation `z = Dx` leaves every quantity used here unchanged up to
//! the per-agent sign `σ_i`, so agents never need to know `D`.
//!
//! States are stacked agent-major: agent `i` owns `x[i*n..(i+1)*n]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::SignedGraph;
use crate::linalg::{sq, DenseMatrix};
use crate::{Error, Result};

/// Positive decaying budget `h(t) = r·e^{−rt}` with `∫₀^∞ h = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFunction {
    rate: f64,
}

impl DecayFunction {
    /// `r = ln 2`, the unit-mass rescaling of `2^{−t}`.
    pub const DEFAULT_RATE: f64 = core::f64::consts::LN_2;

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(alloc::format!(
                "decay rate must be positive, got {rate}"
            )));
        }
        Ok(DecayFunction { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        self.rate * libm::exp(-self.rate * t)
    }

    /// `∫_{t0}^{t1} h`
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        libm::exp(-self.rate * t0) - libm::exp(-self.rate * t1)
    }
}

impl Default for DecayFunction {
    fn default() -> Self {
        DecayFunction { rate: Self::DEFAULT_RATE }
    }
}

/// `Σ_j |w_ij|(x̂_i − sgn(w_ij)·x̂_j)` written into `out` (length `n`).
pub fn disagreement_into(i: usize, xhat: &[f64], graph: &SignedGraph, out: &mut [f64]) {
    let n = out.len();
    out.fill(0.0);
    let own = &xhat[i * n..(i + 1) * n];
    for nb in graph.neighbors(i) {
        let other = &xhat[nb.agent * n..(nb.agent + 1) * n];
        for ((o, &a), &b) in out.iter_mut().zip(own).zip(other) {
            *o += nb.weight * (a - nb.sign * b);
        }
    }
}

pub fn disagreement(i: usize, xhat: &[f64], graph: &SignedGraph) -> Vec<f64> {
    let mut out = vec![0.0; xhat.len() / graph.agent_count()];
    disagreement_into(i, xhat, graph, &mut out);
    out
}

/// `u_i = −K·Σ_j |w_ij|(x̂_i − sgn(w_ij)·x̂_j)`; the sum runs over neighbours.
pub fn control_input(i: usize, xhat: &[f64], graph: &SignedGraph, gain: &DenseMatrix) -> Vec<f64> {
    let d = disagreement(i, xhat, graph);
    gain.mul_vec(&d)
        .expect("gain columns match state dimension")
        .into_iter()
        .map(|v| -v)
        .collect()
}

/// `g_i(t) = ‖x̂_i − x_i‖² − β_i·‖Σ_j |w_ij|(x̂_i − sgn(w_ij)x̂_j)‖² − β_i·h(t)`.
pub fn trigger_integrand(
    i: usize,
    x: &[f64],
    xhat: &[f64],
    t: f64,
    beta_i: f64,
    h: &DecayFunction,
    graph: &SignedGraph,
) -> f64 {
    let n = x.len() / graph.agent_count();
    let err_sq: f64 = (i * n..(i + 1) * n).map(|k| sq(xhat[k] - x[k])).sum();
    let d = disagreement(i, xhat, graph);
    let dis_sq: f64 = d.iter().map(|v| v * v).sum();
    err_sq - beta_i * dis_sq - beta_i * h.value(t)
}

/// Per-agent trigger bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    pub agent: usize,
    /// `t_k^i`
    pub last_event_time: f64,
    /// `x_i(t_k^i)`, the last broadcast state.
    pub x_at_event: Vec<f64>,
    /// `∫_{t_k^i}^t g_i`
    pub accumulator: f64,
    /// Number of events so far, the initial broadcast included.
    pub event_count: u64,
}

impl TriggerState {
    /// State right after the initial broadcast at `t`.
    pub fn broadcast_at(agent: usize, t: f64, x_i: &[f64]) -> Self {
        TriggerState { agent, last_event_time: t, x_at_event: x_i.to_vec(), accumulator: 0.0, event_count: 1 }
    }

    /// Resets the trigger at an event: records the broadcast state and clears
    /// the accumulator. Returns the gap to the previous event.
    pub fn fire(&mut self, t: f64, x_i: &[f64]) -> f64 {
        let gap = t - self.last_event_time;
        self.last_event_time = t;
        self.x_at_event.clear();
        self.x_at_event.extend_from_slice(x_i);
        self.accumulator = 0.0;
        self.event_count += 1;
        gap
    }

    /// Stores the accumulator integrated up to `t` and fires iff it is
    /// positive. The caller resets the estimator to `x_i` on `true`.
    pub fn check_and_fire(&mut self, accumulator: f64, t: f64, x_i: &[f64]) -> bool {
        if accumulator > 0.0 {
            self.fire(t, x_i);
            true
        } else {
            self.accumulator = accumulator;
            false
        }
    }
}
