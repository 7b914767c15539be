//! Scenario files.
//!
//! A scenario is a flat TOML document. Matrices are arrays of rows.
//!
//! ```toml
//! laplacian = [[1.0, -1.0], [-1.0, 1.0]]   # or `adjacency = ...`
//! a = [[0.0]]
//! b = [[1.0]]
//! gain_mode = "verify"                     # needs `p`; "synthesize" takes `q`, `k0`
//! p = [[1.0]]                              # multiplied by `p_scale` (default 1)
//! beta = 0.01                              # scalar or one value per agent
//! initial_states = [[1.0], [-0.5]]         # or `initial_intervals = [[lo, hi], ...]`
//! ```
//!
//! Every other key has a default; [`ScenarioConfig::to_toml`] echoes the
//! resolved document.

use std::path::PathBuf;

use etc_core::design::{parameter_chain, solve_are, ControllerDesign, DesignInputs};
use etc_core::graph::{check_structural_balance, gauged_laplacian, GaugeDecomposition, SignedGraph};
use etc_core::metrics::DEFAULT_CONSENSUS_THRESHOLD;
use etc_core::sim::{SimParams, DEFAULT_DT, DEFAULT_EVENT_TOL};
use etc_core::trigger::DecayFunction;
use etc_core::{DenseMatrix, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;
use crate::{Result, SimError};

pub const DEFAULT_T_FINAL: f64 = 20.0;
pub const DEFAULT_SAMPLES_PER_DT: u32 = 10;
pub const DEFAULT_Q: f64 = 1.0;
pub const DEFAULT_OUT_DIR: &str = "out";

type Rows = Vec<Vec<f64>>;

/// The document as written; every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    adjacency: Option<Rows>,
    laplacian: Option<Rows>,
    a: Option<Rows>,
    b: Option<Rows>,
    gain_mode: Option<String>,
    p: Option<Rows>,
    p_scale: Option<f64>,
    q: Option<f64>,
    k0: Option<Rows>,
    beta: Option<Beta>,
    h_rate: Option<f64>,
    c: Option<f64>,
    t_final: Option<f64>,
    dt: Option<f64>,
    sample_dt: Option<f64>,
    event_tol: Option<f64>,
    seed: Option<u64>,
    initial_states: Option<Rows>,
    initial_intervals: Option<Vec<[f64; 2]>>,
    force_beta: Option<bool>,
    consensus_threshold: Option<f64>,
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Beta {
    Scalar(f64),
    PerAgent(Vec<f64>),
}

/// Which graph matrix the document gave.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphInput {
    Adjacency(Rows),
    Laplacian(Rows),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainMode {
    /// Check `scale·p` against the gain inequality.
    Verify { p: Rows, scale: f64 },
    /// Solve the Riccati equation with margin `q`.
    Synthesize { q: f64, k0: Option<Rows> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialConditions {
    States(Rows),
    /// Per-agent interval; each component drawn uniformly.
    Intervals(Vec<[f64; 2]>),
}

/// Fully resolved scenario, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub graph: GraphInput,
    pub a: Rows,
    pub b: Rows,
    pub gain: GainMode,
    pub beta: Vec<f64>,
    pub h_rate: f64,
    pub c: Option<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub sample_dt: f64,
    pub event_tol: f64,
    pub seed: u64,
    pub initial: InitialConditions,
    pub force_beta: bool,
    pub consensus_threshold: f64,
    pub out_dir: PathBuf,
}

fn schema(msg: impl Into<String>) -> SimError {
    SimError::Schema(msg.into())
}

fn matrix(name: &str, rows: &Rows) -> Result<DenseMatrix> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(schema(format!("`{name}` must be a non-empty array of rows")));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(schema(format!("`{name}` has rows of different lengths")));
    }
    DenseMatrix::from_rows(rows).map_err(|e| schema(format!("`{name}`: {e}")))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(format!("`{name}` must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    /// Parses a document and fills in defaults. Shapes are checked later,
    /// by [`Scenario::new`].
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ScenarioFile = toml::from_str(text)?;
        let graph = match (f.adjacency, f.laplacian) {
            (Some(w), None) => GraphInput::Adjacency(w),
            (None, Some(l)) => GraphInput::Laplacian(l),
            (Some(_), Some(_)) => return Err(schema("give either `adjacency` or `laplacian`, not both")),
            (None, None) => return Err(schema("missing graph: `adjacency` or `laplacian`")),
        };
        let agents = match &graph {
            GraphInput::Adjacency(m) | GraphInput::Laplacian(m) => m.len(),
        };
        let a = f.a.ok_or_else(|| schema("missing `a`"))?;
        let b = f.b.ok_or_else(|| schema("missing `b`"))?;
        let mode = f.gain_mode.as_deref().unwrap_or(if f.p.is_some() { "verify" } else { "synthesize" });
        let gain = match mode {
            "verify" => {
                if f.q.is_some() || f.k0.is_some() {
                    return Err(schema("`q` and `k0` only apply to gain_mode = \"synthesize\""));
                }
                GainMode::Verify {
                    p: f.p.ok_or_else(|| schema("gain_mode = \"verify\" needs `p`"))?,
                    scale: positive("p_scale", f.p_scale.unwrap_or(1.0))?,
                }
            }
            "synthesize" => {
                if f.p.is_some() || f.p_scale.is_some() {
                    return Err(schema("`p` and `p_scale` only apply to gain_mode = \"verify\""));
                }
                GainMode::Synthesize { q: positive("q", f.q.unwrap_or(DEFAULT_Q))?, k0: f.k0 }
            }
            other => {
                return Err(schema(format!("gain_mode must be \"verify\" or \"synthesize\", got {other:?}")))
            }
        };
        let beta = match f.beta.ok_or_else(|| schema("missing `beta`"))? {
            Beta::Scalar(v) => vec![v; agents],
            Beta::PerAgent(v) => v,
        };
        for &v in &beta {
            positive("beta", v)?;
        }
        let dt = positive("dt", f.dt.unwrap_or(DEFAULT_DT))?;
        let initial = match (f.initial_states, f.initial_intervals) {
            (Some(s), None) => InitialConditions::States(s),
            (None, Some(iv)) => InitialConditions::Intervals(iv),
            (None, None) => InitialConditions::Intervals(vec![[-1.0, 1.0]; agents]),
            (Some(_), Some(_)) => {
                return Err(schema("give either `initial_states` or `initial_intervals`, not both"))
            }
        };
        Ok(ScenarioConfig {
            graph,
            a,
            b,
            gain,
            beta,
            h_rate: positive("h_rate", f.h_rate.unwrap_or(DecayFunction::DEFAULT_RATE))?,
            c: f.c.map(|c| positive("c", c)).transpose()?,
            t_final: positive("t_final", f.t_final.unwrap_or(DEFAULT_T_FINAL))?,
            dt,
            sample_dt: positive("sample_dt", f.sample_dt.unwrap_or(dt * f64::from(DEFAULT_SAMPLES_PER_DT)))?,
            event_tol: positive("event_tol", f.event_tol.unwrap_or(DEFAULT_EVENT_TOL))?,
            seed: f.seed.unwrap_or(0),
            initial,
            force_beta: f.force_beta.unwrap_or(false),
            consensus_threshold: positive(
                "consensus_threshold",
                f.consensus_threshold.unwrap_or(DEFAULT_CONSENSUS_THRESHOLD),
            )?,
            out_dir: f.out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        })
    }

    /// Resolved document; loading it again yields the same config.
    pub fn to_toml(&self) -> Result<String> {
        let echo = Echo::from(self);
        toml::to_string(&echo).map_err(|e| SimError::Serialize { what: "scenario", message: e.to_string() })
    }

    pub fn agent_count(&self) -> usize {
        match &self.graph {
            GraphInput::Adjacency(m) | GraphInput::Laplacian(m) => m.len(),
        }
    }

    fn initial_states(&self, dim: usize) -> Result<Vec<f64>> {
        let agents = self.agent_count();
        match &self.initial {
            InitialConditions::States(rows) => {
                if rows.len() != agents || rows.iter().any(|r| r.len() != dim) {
                    return Err(SimError::Dimension(format!(
                        "initial_states must be {agents} rows of {dim} values"
                    )));
                }
                if rows.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(schema("initial_states must be finite"));
                }
                Ok(rows.concat())
            }
            InitialConditions::Intervals(iv) => {
                if iv.len() != agents {
                    return Err(SimError::Dimension(format!(
                        "initial_intervals has {} entries for {agents} agents",
                        iv.len()
                    )));
                }
                if let Some([lo, hi]) = iv.iter().find(|[lo, hi]| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
                    return Err(schema(format!("initial interval [{lo}, {hi}] is empty or not finite")));
                }
                let mut rng = SplitMix64::new(self.seed);
                Ok(iv.iter().flat_map(|&[lo, hi]| (0..dim).map(move |_| (lo, hi))).map(|(lo, hi)| rng.uniform(lo, hi)).collect())
            }
        }
    }
}

/// Serialized form of [`ScenarioConfig`], key-compatible with [`ScenarioFile`].
#[derive(Serialize)]
struct Echo<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    adjacency: Option<&'a Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    laplacian: Option<&'a Rows>,
    a: &'a Rows,
    b: &'a Rows,
    gain_mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<&'a Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k0: Option<&'a Rows>,
    beta: &'a [f64],
    h_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    t_final: f64,
    dt: f64,
    sample_dt: f64,
    event_tol: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_states: Option<&'a Rows>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_intervals: Option<&'a [[f64; 2]]>,
    force_beta: bool,
    consensus_threshold: f64,
    out_dir: &'a std::path::Path,
}

impl<'a> From<&'a ScenarioConfig> for Echo<'a> {
    fn from(c: &'a ScenarioConfig) -> Self {
        let (adjacency, laplacian) = match &c.graph {
            GraphInput::Adjacency(w) => (Some(w), None),
            GraphInput::Laplacian(l) => (None, Some(l)),
        };
        let (gain_mode, p, p_scale, q, k0) = match &c.gain {
            GainMode::Verify { p, scale } => ("verify", Some(p), Some(*scale), None, None),
            GainMode::Synthesize { q, k0 } => ("synthesize", None, None, Some(*q), k0.as_ref()),
        };
        let (initial_states, initial_intervals) = match &c.initial {
            InitialConditions::States(s) => (Some(s), None),
            InitialConditions::Intervals(iv) => (None, Some(iv.as_slice())),
        };
        Echo {
            adjacency,
            laplacian,
            a: &c.a,
            b: &c.b,
            gain_mode,
            p,
            p_scale,
            q,
            k0,
            beta: &c.beta,
            h_rate: c.h_rate,
            c: c.c,
            t_final: c.t_final,
            dt: c.dt,
            sample_dt: c.sample_dt,
            event_tol: c.event_tol,
            seed: c.seed,
            initial_states,
            initial_intervals,
            force_beta: c.force_beta,
            consensus_threshold: c.consensus_threshold,
            out_dir: &c.out_dir,
        }
    }
}

/// A validated scenario: graph, gauge, gain design and initial state.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub graph: SignedGraph,
    pub gauge: GaugeDecomposition,
    pub design: ControllerDesign,
    pub params: SimParams,
    pub x0: Vec<f64>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let a = matrix("a", &config.a)?;
        let b = matrix("b", &config.b)?;
        let n = a.rows();
        if !a.is_square() {
            return Err(SimError::Dimension(format!("`a` is {}×{}, must be square", a.rows(), a.cols())));
        }
        if b.rows() != n {
            return Err(SimError::Dimension(format!("`b` has {} rows, `a` has {n}", b.rows())));
        }
        let graph = match &config.graph {
            GraphInput::Adjacency(w) => SignedGraph::new(matrix("adjacency", w)?),
            GraphInput::Laplacian(l) => SignedGraph::from_laplacian(&matrix("laplacian", l)?),
        }
        .map_err(SimError::Graph)?;
        let agents = graph.agent_count();
        if config.beta.len() != agents {
            return Err(SimError::Dimension(format!(
                "{} trigger weights for {agents} agents",
                config.beta.len()
            )));
        }
        let gauge = check_structural_balance(&graph).map_err(SimError::Graph)?;
        let ld = gauged_laplacian(&graph, &gauge);

        let p = match &config.gain {
            GainMode::Verify { p, scale } => {
                let p = matrix("p", p)?.scale(*scale);
                if !p.is_square() || p.rows() != n {
                    return Err(SimError::Dimension(format!("`p` must be {n}×{n}")));
                }
                p
            }
            GainMode::Synthesize { q, k0 } => {
                let k0 = k0.as_ref().map(|k| matrix("k0", k)).transpose()?;
                if let Some(k) = &k0 {
                    if k.rows() != b.cols() || k.cols() != n {
                        return Err(SimError::Dimension(format!("`k0` must be {}×{n}", b.cols())));
                    }
                }
                let alpha = etc_core::graph::algebraic_connectivity(&ld).map_err(SimError::Graph)?;
                solve_are(&a, &b, alpha, *q, k0.as_ref()).map_err(SimError::Gain)?
            }
        };
        let design = parameter_chain(DesignInputs {
            a: &a,
            b: &b,
            p: &p,
            gauged_laplacian: &ld,
            c: config.c,
            beta_i: &config.beta,
            force_beta: config.force_beta,
        })
        .map_err(|e| match e {
            CoreError::BetaTooLarge { .. } | CoreError::InvalidC { .. } => SimError::Budget(e),
            other => SimError::Gain(other),
        })?;

        let x0 = config.initial_states(n)?;
        let params = SimParams {
            a,
            b,
            gain: design.k.clone(),
            graph: graph.clone(),
            gauge: gauge.clone(),
            beta_i: config.beta.clone(),
            decay: DecayFunction::exponential(config.h_rate).map_err(|e| schema(e.to_string()))?,
            dt: config.dt,
            t_final: config.t_final,
            sample_dt: config.sample_dt,
            event_tol: config.event_tol,
            tie_window: config.event_tol,
        };
        params.validate().map_err(|e| schema(e.to_string()))?;
        Ok(Scenario { config, graph, gauge, design, params, x0 })
    }
}

/// Parses, resolves and validates a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    Scenario::new(ScenarioConfig::from_toml(text)?)
}
