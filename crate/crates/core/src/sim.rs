//! Closed-loop hybrid simulation.
//!
//! Between events the state `(x, x̂, F, ∫‖δ‖²)` follows
//!
//! * `ẋ_i = A x_i + B u_i` with the event-triggered control law,
//! * `d/dt x̂_i = A x̂_i` (the estimator),
//! * `Ḟ_i = g_i(t)` (the trigger accumulator),
//! * `d/dt ∫‖δ‖² = ‖δ‖²` (an auxiliary quadrature for the Lyapunov monitor),
//!
//! integrated with classical fixed-step RK4. When some accumulator turns
//! positive inside a step, the crossing is bracketed by bisection (each
//! probe re-integrates from the start of the step), every agent whose own
//! crossing lies within the tie window of the localized instant fires, and
//! integration resumes for the rest of the step.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{GaugeDecomposition, SignedGraph};
use crate::linalg::{sq, DenseMatrix};
use crate::trigger::{DecayFunction, TriggerState};
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;
/// Absolute time resolution of event localization, seconds.
pub const DEFAULT_EVENT_TOL: f64 = 1e-9;
/// Default tie window, seconds: at a localized event, an agent with
/// `F ≤ 0` also fires when its accumulator is rising and would reach zero
/// within this window (`−F ≤ window·Ḟ`).
pub const DEFAULT_TIE_WINDOW: f64 = DEFAULT_EVENT_TOL;
const MAX_EVENTS_PER_STEP: usize = 1_000_000;

/// Everything the simulator needs; validated by [`SimParams::validate`].
#[derive(Debug, Clone)]
pub struct SimParams {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    /// `K`, of size `m×n`.
    pub gain: DenseMatrix,
    pub graph: SignedGraph,
    /// Only used for the `∫‖δ‖²` quadrature; the dynamics never see it.
    pub gauge: GaugeDecomposition,
    pub beta_i: Vec<f64>,
    pub decay: DecayFunction,
    pub dt: f64,
    pub t_final: f64,
    pub sample_dt: f64,
    pub event_tol: f64,
    pub tie_window: f64,
}

impl SimParams {
    pub fn agent_count(&self) -> usize {
        self.graph.agent_count()
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    /// Number of integration steps per trajectory sample.
    pub fn steps_per_sample(&self) -> usize {
        libm::round(self.sample_dt / self.dt) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        let (n, m, agents) = (self.a.rows(), self.b.cols(), self.agent_count());
        if !self.a.is_square() || self.b.rows() != n {
            return bad(alloc::format!(
                "A must be square and B must have matching rows (A {}x{}, B {}x{})",
                self.a.rows(),
                self.a.cols(),
                self.b.rows(),
                self.b.cols()
            ));
        }
        if self.gain.rows() != m || self.gain.cols() != n {
            return bad(alloc::format!(
                "K must be {m}x{n}, got {}x{}",
                self.gain.rows(),
                self.gain.cols()
            ));
        }
        if self.beta_i.len() != agents || self.gauge.sigma().len() != agents {
            return bad(alloc::format!("need {agents} trigger weights and gauge signs"));
        }
        if self.beta_i.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return bad("trigger weights must be positive".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(alloc::format!("t_final must be positive, got {}", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt <= self.sample_dt && self.sample_dt <= self.t_final) {
            return bad(alloc::format!(
                "need 0 < dt <= sample_dt <= t_final (dt = {}, sample_dt = {}, t_final = {})",
                self.dt,
                self.sample_dt,
                self.t_final
            ));
        }
        let ratio = self.sample_dt / self.dt;
        if (ratio - libm::round(ratio)).abs() > 1e-9 * ratio {
            return bad(alloc::format!(
                "sample_dt = {} must be an integer multiple of dt = {}",
                self.sample_dt,
                self.dt
            ));
        }
        if !(self.event_tol > 0.0 && self.event_tol < self.dt) {
            return bad(alloc::format!(
                "event_tol must lie in (0, dt), got {}",
                self.event_tol
            ));
        }
        if !(self.tie_window >= 0.0 && self.tie_window < self.dt) {
            return bad(alloc::format!("tie window must lie in [0, dt), got {}", self.tie_window));
        }
        Ok(())
    }
}

/// Global hybrid state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// True states, agent-major.
    pub x: Vec<f64>,
    /// Estimator states, agent-major.
    pub xhat: Vec<f64>,
    pub triggers: Vec<TriggerState>,
    /// `∫₀^t ‖δ‖²` with `δ_i = σ_i x_i − mean_j σ_j x_j`.
    pub delta_sq_integral: f64,
}

impl SimState {
    /// State right after the initial broadcast of every agent at `t = 0`.
    pub fn initial(x0: &[f64], agents: usize) -> Self {
        let n = x0.len() / agents;
        SimState {
            t: 0.0,
            x: x0.to_vec(),
            xhat: x0.to_vec(),
            triggers: (0..agents)
                .map(|i| TriggerState::broadcast_at(i, 0.0, &x0[i * n..(i + 1) * n]))
                .collect(),
            delta_sq_integral: 0.0,
        }
    }

    pub fn accumulators(&self) -> Vec<f64> {
        self.triggers.iter().map(|t| t.accumulator).collect()
    }
}

/// Time derivative of every continuous component of [`SimState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub accumulators: Vec<f64>,
    pub delta_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub agent: usize,
    pub time: f64,
    /// Index of the event for this agent; the broadcast at `t = 0` is `k = 0`.
    pub k: u64,
    /// Time since the previous event of this agent (0 for `k = 0`).
    pub gap: f64,
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub agents: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    /// One stacked `N·n` vector per sample.
    pub x: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
    /// One `N` vector of accumulators per sample.
    pub accumulators: Vec<Vec<f64>>,
    pub delta_sq_integral: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, s: &SimState) {
        self.times.push(s.t);
        self.x.push(s.x.clone());
        self.xhat.push(s.xhat.clone());
        self.accumulators.push(s.accumulators());
        self.delta_sq_integral.push(s.delta_sq_integral);
    }
}

/// Result of a full run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trajectory: Trajectory,
    pub events: Vec<EventRecord>,
    pub final_state: SimState,
    /// Largest accumulator value at a firing instant; positive overshoot
    /// measures how far the trigger-integral inequality is exceeded.
    pub max_fire_accumulator: f64,
    pub warnings: Vec<String>,
}

/// Flat, precomputed form of [`SimParams`] used inside the integrator.
#[derive(Debug, Clone)]
struct Model {
    agents: usize,
    n: usize,
    a: Vec<f64>,
    bk: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64, f64)>>,
    beta: Vec<f64>,
    decay: DecayFunction,
    sigma: Vec<f64>,
}

impl Model {
    fn new(p: &SimParams) -> Self {
        let bk = &p.b * &p.gain;
        Model {
            agents: p.agent_count(),
            n: p.state_dim(),
            a: p.a.as_slice().to_vec(),
            bk: bk.as_slice().to_vec(),
            neighbors: (0..p.agent_count())
                .map(|i| p.graph.neighbors(i).iter().map(|nb| (nb.agent, nb.weight, nb.sign)).collect())
                .collect(),
            beta: p.beta_i.clone(),
            decay: p.decay,
            sigma: (0..p.agent_count()).map(|i| p.gauge.sign(i)).collect(),
        }
    }

    fn len(&self) -> usize {
        2 * self.agents * self.n + self.agents + 1
    }

    fn pack(&self, s: &SimState, y: &mut [f64]) {
        let nn = self.agents * self.n;
        y[..nn].copy_from_slice(&s.x);
        y[nn..2 * nn].copy_from_slice(&s.xhat);
        for (dst, tr) in y[2 * nn..2 * nn + self.agents].iter_mut().zip(&s.triggers) {
            *dst = tr.accumulator;
        }
        y[2 * nn + self.agents] = s.delta_sq_integral;
    }

    fn unpack(&self, y: &[f64], t: f64, template: &SimState) -> SimState {
        let nn = self.agents * self.n;
        let mut s = template.clone();
        s.t = t;
        s.x.copy_from_slice(&y[..nn]);
        s.xhat.copy_from_slice(&y[nn..2 * nn]);
        for (tr, &f) in s.triggers.iter_mut().zip(&y[2 * nn..2 * nn + self.agents]) {
            tr.accumulator = f;
        }
        s.delta_sq_integral = y[2 * nn + self.agents];
        s
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64], scratch: &mut [f64]) {
        let (agents, n) = (self.agents, self.n);
        let nn = agents * n;
        let (x, rest) = y.split_at(nn);
        let xhat = &rest[..nn];
        let h = self.decay.value(t);
        let (d, mean) = scratch.split_at_mut(n);
        mean.fill(0.0);
        for i in 0..agents {
            for c in 0..n {
                mean[c] += self.sigma[i] * x[i * n + c];
            }
        }
        for m in mean.iter_mut() {
            *m /= agents as f64;
        }
        let mut delta_sq = 0.0;

        for i in 0..agents {
            let xi = &x[i * n..(i + 1) * n];
            let xhi = &xhat[i * n..(i + 1) * n];
            d.fill(0.0);
            for &(j, w, s) in &self.neighbors[i] {
                let xhj = &xhat[j * n..(j + 1) * n];
                for c in 0..n {
                    d[c] += w * (xhi[c] - s * xhj[c]);
                }
            }
            let mut err_sq = 0.0;
            let mut dis_sq = 0.0;
            for r in 0..n {
                let arow = &self.a[r * n..(r + 1) * n];
                let bkrow = &self.bk[r * n..(r + 1) * n];
                let mut ax = 0.0;
                let mut axh = 0.0;
                let mut bkd = 0.0;
                for c in 0..n {
                    ax += arow[c] * xi[c];
                    axh += arow[c] * xhi[c];
                    bkd += bkrow[c] * d[c];
                }
                dy[i * n + r] = ax - bkd;
                dy[nn + i * n + r] = axh;
                err_sq += sq(xhi[r] - xi[r]);
                dis_sq += d[r] * d[r];
                delta_sq += sq(self.sigma[i] * xi[r] - mean[r]);
            }
            dy[2 * nn + i] = err_sq - self.beta[i] * (dis_sq + h);
        }
        dy[2 * nn + agents] = delta_sq;
    }

    fn rk4(&self, s: &SimState, h: f64, work: &mut Work) -> Result<SimState> {
        let len = self.len();
        let Work { y, k1, k2, k3, k4, tmp, scratch } = work;
        self.pack(s, y);
        let t = s.t;
        self.rhs(t, y, k1, scratch);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.rhs(t + 0.5 * h, tmp, k2, scratch);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.rhs(t + 0.5 * h, tmp, k3, scratch);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(t + h, tmp, k4, scratch);
        for i in 0..len {
            tmp[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(bad) = tmp.iter().position(|v| !v.is_finite()) {
            let nn = self.agents * self.n;
            let agent = if bad < 2 * nn { (bad % nn) / self.n } else { (bad - 2 * nn).min(self.agents - 1) };
            return Err(Error::NumericBlowup { t: t + h, agent });
        }
        Ok(self.unpack(tmp, t + h, s))
    }
}

#[derive(Debug)]
struct Work {
    y: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    scratch: Vec<f64>,
}

impl Work {
    fn new(m: &Model) -> Self {
        let len = m.len();
        Work {
            y: vec![0.0; len],
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
            scratch: vec![0.0; 2 * m.n],
        }
    }
}

fn check_state(p: &SimParams, s: &SimState) -> Result<()> {
    let nn = p.agent_count() * p.state_dim();
    if s.x.len() != nn || s.xhat.len() != nn || s.triggers.len() != p.agent_count() {
        return Err(Error::InvalidArgument(alloc::format!(
            "state does not match {} agents of dimension {}",
            p.agent_count(),
            p.state_dim()
        )));
    }
    Ok(())
}

/// Right-hand side of the hybrid system at `s`.
pub fn derivative(s: &SimState, params: &SimParams) -> Result<Derivative> {
    check_state(params, s)?;
    let model = Model::new(params);
    let mut y = vec![0.0; model.len()];
    let mut dy = vec![0.0; model.len()];
    let mut scratch = vec![0.0; 2 * model.n];
    model.pack(s, &mut y);
    model.rhs(s.t, &y, &mut dy, &mut scratch);
    let nn = model.agents * model.n;
    Ok(Derivative {
        x: dy[..nn].to_vec(),
        xhat: dy[nn..2 * nn].to_vec(),
        accumulators: dy[2 * nn..2 * nn + model.agents].to_vec(),
        delta_sq: dy[2 * nn + model.agents],
    })
}

/// One classical RK4 step of length `dt`, without event handling.
pub fn step(s: &SimState, dt: f64, params: &SimParams) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("step size must be positive, got {dt}")));
    }
    check_state(params, s)?;
    let model = Model::new(params);
    model.rk4(s, dt, &mut Work::new(&model))
}

/// Events found while completing one step.
#[derive(Debug, Clone)]
pub struct StepEvents {
    pub state: SimState,
    pub events: Vec<EventRecord>,
    pub max_fire_accumulator: f64,
    pub warnings: Vec<String>,
}

/// Completes the step `before → after` (of length `dt`), localizing and
/// processing every trigger crossing inside it.
pub fn locate_and_process_events(
    before: &SimState,
    after: SimState,
    dt: f64,
    params: &SimParams,
) -> Result<StepEvents> {
    check_state(params, before)?;
    let model = Model::new(params);
    let mut work = Work::new(&model);
    let mut out = StepEvents {
        state: before.clone(),
        events: Vec::new(),
        max_fire_accumulator: f64::NEG_INFINITY,
        warnings: Vec::new(),
    };
    finish_step(&model, params, before.t + dt, Some(after), &mut out, &mut work)?;
    Ok(out)
}

fn any_positive(s: &SimState) -> bool {
    s.triggers.iter().any(|t| t.accumulator > 0.0)
}

/// Integrates `out.state` up to `t_target`, processing events on the way.
/// `first` may carry an already computed full step from `out.state`.
fn finish_step(
    model: &Model,
    p: &SimParams,
    t_target: f64,
    mut first: Option<SimState>,
    out: &mut StepEvents,
    work: &mut Work,
) -> Result<()> {
    let mut count = 0usize;
    loop {
        let h = t_target - out.state.t;
        if h <= 0.0 {
            out.state.t = t_target;
            return Ok(());
        }
        if any_positive(&out.state) {
            out.warnings.push(alloc::format!(
                "accumulator already positive at t = {}; firing without localization",
                out.state.t
            ));
            let mut s = out.state.clone();
            fire_ready(model, p, &mut s, out, work);
            out.state = s;
            continue;
        }
        let mut after = match first.take() {
            Some(a) => a,
            None => model.rk4(&out.state, h, work)?,
        };
        if !any_positive(&after) {
            after.t = t_target;
            out.state = after;
            return Ok(());
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut at_hi = after;
        while hi - lo > p.event_tol {
            let mid = 0.5 * (lo + hi);
            let probe = model.rk4(&out.state, mid, work)?;
            if any_positive(&probe) {
                hi = mid;
                at_hi = probe;
            } else {
                lo = mid;
            }
        }
        if hi == h {
            at_hi.t = t_target;
        }
        fire_ready(model, p, &mut at_hi, out, work);
        out.state = at_hi;

        count += 1;
        if count > MAX_EVENTS_PER_STEP {
            return Err(Error::NumericFailure(alloc::format!(
                "more than {MAX_EVENTS_PER_STEP} event instants inside one step at t = {}",
                out.state.t
            )));
        }
    }
}

/// Fires every agent whose accumulator is positive, or rising and due to
/// cross zero within the tie window.
fn fire_ready(model: &Model, p: &SimParams, s: &mut SimState, out: &mut StepEvents, work: &mut Work) {
    let n = p.state_dim();
    let t = s.t;
    let nn = model.agents * n;
    model.pack(s, &mut work.y);
    model.rhs(t, &work.y, &mut work.k1, &mut work.scratch);
    for i in 0..s.triggers.len() {
        let f = s.triggers[i].accumulator;
        let rate = work.k1[2 * nn + i];
        if f > 0.0 || (rate > 0.0 && -f <= p.tie_window * rate) {
            out.max_fire_accumulator = out.max_fire_accumulator.max(f);
            let xi = s.x[i * n..(i + 1) * n].to_vec();
            let gap = s.triggers[i].fire(t, &xi);
            s.xhat[i * n..(i + 1) * n].copy_from_slice(&xi);
            out.events.push(EventRecord { agent: i, time: t, k: s.triggers[i].event_count - 1, gap });
        }
    }
}

/// Simulates `[0, t_final]` from `x0` (stacked `N·n`).
pub fn run(params: &SimParams, x0: &[f64]) -> Result<SimOutput> {
    params.validate()?;
    let agents = params.agent_count();
    let n = params.state_dim();
    if x0.len() != agents * n {
        return Err(Error::InvalidArgument(alloc::format!(
            "initial state has length {}, expected {}",
            x0.len(),
            agents * n
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let model = Model::new(params);
    let mut work = Work::new(&model);

    let state = SimState::initial(x0, agents);
    let events = (0..agents).map(|i| EventRecord { agent: i, time: 0.0, k: 0, gap: 0.0 }).collect();
    let mut out = StepEvents { state, events, max_fire_accumulator: f64::NEG_INFINITY, warnings: Vec::new() };
    let mut trajectory = Trajectory { agents, dim: n, ..Trajectory::default() };
    trajectory.push(&out.state);

    let steps = libm::ceil(params.t_final / params.dt - 1e-9) as usize;
    let per_sample = params.steps_per_sample();
    for step_index in 1..=steps {
        let t_target = (step_index as f64 * params.dt).min(params.t_final);
        finish_step(&model, params, t_target, None, &mut out, &mut work)?;
        if step_index % per_sample == 0 {
            trajectory.push(&out.state);
        }
    }
    Ok(SimOutput {
        trajectory,
        events: out.events,
        final_state: out.state,
        max_fire_accumulator: out.max_fire_accumulator,
        warnings: out.warnings,
    })
}
