//! Consensus metrics and the runtime monitors built on them.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{sq, DenseMatrix};
use crate::sim::{EventRecord, Trajectory};

/// Relative tolerance of the Lyapunov monitor: `1e-6·max(1, V(0))`.
pub const MONITOR_TOL_REL: f64 = 1e-6;
/// Default finite-horizon consensus threshold.
pub const DEFAULT_CONSENSUS_THRESHOLD: f64 = 1e-2;

/// `max_{i,j} ‖σ_i x_i − σ_j x_j‖` over stacked states of dimension `dim`.
pub fn bipartite_error(x: &[f64], dim: usize, sigma: &[i8]) -> f64 {
    let agents = sigma.len();
    let mut worst = 0.0_f64;
    for i in 0..agents {
        for j in (i + 1)..agents {
            let (si, sj) = (f64::from(sigma[i]), f64::from(sigma[j]));
            let d: f64 = (0..dim).map(|c| sq(si * x[i * dim + c] - sj * x[j * dim + c])).sum();
            worst = worst.max(d);
        }
    }
    libm::sqrt(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovValue {
    /// `V = δᵀ(I_N ⊗ P)δ`
    pub v: f64,
    /// `‖δ‖²`
    pub delta_sq: f64,
}

/// `V` and `‖δ‖²` for `δ_i = σ_i x_i − z̄`, `z̄ = mean_i σ_i x_i`.
pub fn lyapunov_value(x: &[f64], sigma: &[i8], p: &DenseMatrix) -> LyapunovValue {
    let agents = sigma.len();
    let dim = p.rows();
    let mut mean = vec![0.0; dim];
    for i in 0..agents {
        for c in 0..dim {
            mean[c] += f64::from(sigma[i]) * x[i * dim + c] / agents as f64;
        }
    }
    let mut v = 0.0;
    let mut delta_sq = 0.0;
    let mut delta = vec![0.0; dim];
    for i in 0..agents {
        for c in 0..dim {
            delta[c] = f64::from(sigma[i]) * x[i * dim + c] - mean[c];
            delta_sq += delta[c] * delta[c];
        }
        for r in 0..dim {
            v += delta[r] * p.row(r).iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    LyapunovValue { v, delta_sq }
}

/// Inter-event statistics of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats {
    pub agent: usize,
    /// Events including the initial broadcast.
    pub count: usize,
    /// `None` when the agent has at most one event.
    pub min_gap: Option<f64>,
    pub mean_gap: Option<f64>,
}

pub fn miet_stats(events: &[EventRecord], agents: usize) -> Vec<IntervalStats> {
    let mut times: Vec<Vec<f64>> = vec![Vec::new(); agents];
    for e in events {
        if e.agent < agents {
            times[e.agent].push(e.time);
        }
    }
    times
        .into_iter()
        .enumerate()
        .map(|(agent, mut ts)| {
            ts.sort_by(f64::total_cmp);
            let gaps: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
            let (min_gap, mean_gap) = if gaps.is_empty() {
                (None, None)
            } else {
                (
                    Some(gaps.iter().copied().fold(f64::INFINITY, f64::min)),
                    Some(gaps.iter().sum::<f64>() / gaps.len() as f64),
                )
            };
            IntervalStats { agent, count: ts.len(), min_gap, mean_gap }
        })
        .collect()
}

/// Integrated Lyapunov inequality `V(t) − V(0) + c₁∫₀^t‖δ‖² − c₂ ≤ tol`
/// evaluated at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovMonitor {
    /// Left-hand side at every sample.
    pub slack: Vec<f64>,
    pub max_slack: f64,
    pub tolerance: f64,
}

impl LyapunovMonitor {
    pub fn holds(&self) -> bool {
        self.max_slack <= self.tolerance
    }
}

pub fn lyapunov_monitor(traj: &Trajectory, sigma: &[i8], p: &DenseMatrix, c1: f64, c2: f64) -> LyapunovMonitor {
    let v0 = traj.x.first().map_or(0.0, |x0| lyapunov_value(x0, sigma, p).v);
    let slack: Vec<f64> = traj
        .x
        .iter()
        .zip(&traj.delta_sq_integral)
        .map(|(x, &int)| lyapunov_value(x, sigma, p).v - v0 + c1 * int - c2)
        .collect();
    let max_slack = slack.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    LyapunovMonitor { slack, max_slack, tolerance: MONITOR_TOL_REL * v0.max(1.0) }
}

/// Estimator error `‖x̂_i − x_i‖` split at half the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorErrorBound {
    pub agent: usize,
    pub max_first_half: f64,
    pub max_second_half: f64,
}

impl EstimatorErrorBound {
    pub fn max(&self) -> f64 {
        self.max_first_half.max(self.max_second_half)
    }

    /// Bounded without a growth trend over the second half.
    pub fn holds(&self) -> bool {
        self.max().is_finite() && self.max_second_half <= self.max_first_half
    }
}

pub fn estimator_error_monitor(traj: &Trajectory) -> Vec<EstimatorErrorBound> {
    let (agents, dim) = (traj.agents, traj.dim);
    let t_half = traj.times.last().copied().unwrap_or(0.0) / 2.0;
    (0..agents)
        .map(|i| {
            let mut b = EstimatorErrorBound { agent: i, max_first_half: 0.0, max_second_half: 0.0 };
            for ((t, x), xh) in traj.times.iter().zip(&traj.x).zip(&traj.xhat) {
                let e = libm::sqrt((i * dim..(i + 1) * dim).map(|k| sq(xh[k] - x[k])).sum());
                if *t <= t_half {
                    b.max_first_half = b.max_first_half.max(e);
                } else {
                    b.max_second_half = b.max_second_half.max(e);
                }
            }
            b
        })
        .collect()
}

/// Bipartite error at the start, middle and end of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusCheck {
    pub initial: f64,
    pub midpoint: f64,
    pub last: f64,
    pub threshold: f64,
}

impl ConsensusCheck {
    pub fn decreasing(&self) -> bool {
        self.last < self.midpoint && self.midpoint < self.initial
    }

    /// Consensus at the horizon: final error below the threshold.
    pub fn holds(&self) -> bool {
        self.last < self.threshold
    }
}

pub fn consensus_check(traj: &Trajectory, sigma: &[i8], threshold: f64) -> ConsensusCheck {
    let err = |k: usize| bipartite_error(&traj.x[k], traj.dim, sigma);
    let last = traj.len().saturating_sub(1);
    ConsensusCheck { initial: err(0), midpoint: err(last / 2), last: err(last), threshold }
}
