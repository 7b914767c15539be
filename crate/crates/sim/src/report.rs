use std::fmt::Write as _;

use etc_core::design::ControllerDesign;
use etc_core::metrics::{
    consensus_check, estimator_error_monitor, lyapunov_monitor, miet_stats, ConsensusCheck,
};
use etc_core::sim::SimOutput;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

/// Gain and parameter-chain constants, as printed by `design`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub sigma: Vec<i8>,
    pub alpha: f64,
    pub kappa: f64,
    pub p: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub c: f64,
    pub beta: f64,
    pub budget_terms: [f64; 2],
    pub beta_max_bound: f64,
    pub beta_forced: bool,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub lambda_rate: f64,
    pub beta_i: Vec<f64>,
    pub miet_bound_i: Vec<f64>,
}

impl DesignSummary {
    pub fn new(design: &ControllerDesign, sigma: &[i8]) -> Self {
        DesignSummary {
            sigma: sigma.to_vec(),
            alpha: design.alpha,
            kappa: design.kappa,
            p: design.p.to_rows(),
            k: design.k.to_rows(),
            c: design.c,
            beta: design.beta,
            budget_terms: design.budget_terms,
            beta_max_bound: design.beta_max_bound,
            beta_forced: design.beta_forced,
            c1: design.c1,
            c2: design.c2,
            lambda_rate: design.lambda_rate,
            beta_i: design.beta_i.clone(),
            miet_bound_i: design.miet_bound_i.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub beta_i: f64,
    pub miet_bound_i: f64,
    /// Smallest gap between consecutive events; `None` with a single event.
    pub observed_miet: Option<f64>,
    pub mean_gap: Option<f64>,
    pub event_count: usize,
}

/// Outcome of one monitored invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    pub consensus: Verdict,
    pub inter_event_bound: Verdict,
    pub lyapunov_inequality: Verdict,
    pub estimator_error: Verdict,
}

impl Monitors {
    pub fn all_pass(&self) -> bool {
        [self.consensus, self.inter_event_bound, self.lyapunov_inequality, self.estimator_error]
            .iter()
            .all(|v| *v != Verdict::Fail)
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    #[serde(flatten)]
    pub design: DesignSummary,
    pub t_final: f64,
    pub dt: f64,
    pub event_tol: f64,
    pub seed: u64,
    pub agents: Vec<AgentSummary>,
    pub total_events: usize,
    pub initial_bipartite_error: f64,
    pub final_bipartite_error: f64,
    pub consensus_threshold: f64,
    /// Largest gap shortfall below `miet_bound_i − 2·event_tol` (≤ 0 when the
    /// bound holds).
    pub worst_gap_shortfall: f64,
    /// `max_t V(t) − V(0) + c₁∫‖δ‖² − c₂`; absent when `c₁`, `c₂` are.
    pub lyapunov_max_slack: Option<f64>,
    pub lyapunov_tolerance: Option<f64>,
    pub estimator_error_max: f64,
    /// `None` when no trigger fired after the initial instant.
    pub max_fire_accumulator: Option<f64>,
    pub warnings: Vec<String>,
    pub monitors: Monitors,
    pub pass: bool,
}

impl SummaryReport {
    /// Every floating-point value in the report.
    pub fn floats(&self) -> impl Iterator<Item = f64> + '_ {
        let d = &self.design;
        let scalars = [
            d.alpha,
            d.kappa,
            d.c,
            d.beta,
            d.budget_terms[0],
            d.budget_terms[1],
            d.beta_max_bound,
            d.lambda_rate,
            self.t_final,
            self.dt,
            self.event_tol,
            self.initial_bipartite_error,
            self.final_bipartite_error,
            self.consensus_threshold,
            self.worst_gap_shortfall,
            self.estimator_error_max,
        ];
        let optional = [d.c1, d.c2, self.lyapunov_max_slack, self.lyapunov_tolerance, self.max_fire_accumulator].into_iter().flatten();
        let agents = self.agents.iter().flat_map(|a| {
            [a.beta_i, a.miet_bound_i].into_iter().chain(a.observed_miet).chain(a.mean_gap)
        });
        scalars
            .into_iter()
            .chain(optional)
            .chain(d.p.iter().chain(&d.k).flatten().copied())
            .chain(d.beta_i.iter().chain(&d.miet_bound_i).copied())
            .chain(agents)
    }

    pub fn new(scenario: &Scenario, out: &SimOutput) -> Self {
        let design = &scenario.design;
        let sigma = scenario.gauge.sigma();
        let agents = scenario.graph.agent_count();
        let event_tol = scenario.params.event_tol;

        let stats = miet_stats(&out.events, agents);
        let agent_rows: Vec<AgentSummary> = stats
            .iter()
            .map(|s| AgentSummary {
                agent: s.agent,
                beta_i: design.beta_i[s.agent],
                miet_bound_i: design.miet_bound_i[s.agent],
                observed_miet: s.min_gap,
                mean_gap: s.mean_gap,
                event_count: s.count,
            })
            .collect();
        let worst_gap_shortfall = out
            .events
            .iter()
            .filter(|e| e.k > 0)
            .map(|e| design.miet_bound_i[e.agent] - 2.0 * event_tol - e.gap)
            .fold(f64::NEG_INFINITY, f64::max);
        let gaps_ok = !(worst_gap_shortfall > 0.0);

        let consensus: ConsensusCheck =
            consensus_check(&out.trajectory, sigma, scenario.config.consensus_threshold);
        let lyapunov = match (design.c1, design.c2) {
            (Some(c1), Some(c2)) => Some(lyapunov_monitor(&out.trajectory, sigma, &design.p, c1, c2)),
            _ => None,
        };
        let estimator = estimator_error_monitor(&out.trajectory);

        let monitors = Monitors {
            consensus: Verdict::from_bool(consensus.holds()),
            inter_event_bound: Verdict::from_bool(gaps_ok),
            lyapunov_inequality: lyapunov.as_ref().map_or(Verdict::Skipped, |m| Verdict::from_bool(m.holds())),
            estimator_error: Verdict::from_bool(estimator.iter().all(|b| b.holds())),
        };
        let pass = monitors.all_pass();
        SummaryReport {
            design: DesignSummary::new(design, sigma),
            t_final: scenario.params.t_final,
            dt: scenario.params.dt,
            event_tol,
            seed: scenario.config.seed,
            agents: agent_rows,
            total_events: out.events.len(),
            initial_bipartite_error: consensus.initial,
            final_bipartite_error: consensus.last,
            consensus_threshold: consensus.threshold,
            worst_gap_shortfall: if worst_gap_shortfall.is_finite() { worst_gap_shortfall } else { 0.0 },
            lyapunov_max_slack: lyapunov.as_ref().map(|m| m.max_slack),
            lyapunov_tolerance: lyapunov.as_ref().map(|m| m.tolerance),
            estimator_error_max: estimator.iter().map(|b| b.max()).fold(0.0, f64::max),
            max_fire_accumulator: Some(out.max_fire_accumulator).filter(|v| v.is_finite()),
            warnings: out.warnings.clone(),
            monitors,
            pass,
        }
    }

    /// `report.txt` contents.
    pub fn render_text(&self, runtime_s: f64) -> String {
        let mut s = String::new();
        let m = &self.monitors;
        let _ = writeln!(s, "agents {}  events {}  t_final {} s  dt {} s  seed {}", self.agents.len(), self.total_events, self.t_final, self.dt, self.seed);
        let _ = writeln!(s, "runtime {runtime_s:.3} s");
        let _ = writeln!(s, "alpha {:.6e}  kappa {:.6e}  lambda {:.6e}", self.design.alpha, self.design.kappa, self.design.lambda_rate);
        let _ = writeln!(
            s,
            "beta_max {:.6e}  admissible bound {:.6e}{}",
            self.design.beta_i.iter().copied().fold(0.0, f64::max),
            self.design.beta_max_bound,
            if self.design.beta_forced { "  (forced above bound)" } else { "" }
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<22}{:<9}bipartite error {:.3e} -> {:.3e} (threshold {:.1e})",
            "consensus",
            m.consensus.label(),
            self.initial_bipartite_error,
            self.final_bipartite_error,
            self.consensus_threshold
        );
        let _ = writeln!(
            s,
            "{:<22}{:<9}worst shortfall {:.3e} s",
            "inter-event bound",
            m.inter_event_bound.label(),
            self.worst_gap_shortfall
        );
        match (self.lyapunov_max_slack, self.lyapunov_tolerance) {
            (Some(slack), Some(tol)) => {
                let _ = writeln!(s, "{:<22}{:<9}max slack {slack:.3e} (tolerance {tol:.1e})", "lyapunov inequality", m.lyapunov_inequality.label());
            }
            _ => {
                let _ = writeln!(s, "{:<22}{:<9}weights outside the admissible bound", "lyapunov inequality", m.lyapunov_inequality.label());
            }
        }
        let _ = writeln!(
            s,
            "{:<22}{:<9}max |xhat - x| {:.3e}",
            "estimator error",
            m.estimator_error.label(),
            self.estimator_error_max
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>5} {:>12} {:>12} {:>12} {:>12} {:>8}", "agent", "beta", "miet bound", "min gap", "mean gap", "events");
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
        for a in &self.agents {
            let _ = writeln!(
                s,
                "{:>5} {:>12.4e} {:>12.4e} {:>12} {:>12} {:>8}",
                a.agent,
                a.beta_i,
                a.miet_bound_i,
                opt(a.observed_miet),
                opt(a.mean_gap),
                a.event_count
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}
