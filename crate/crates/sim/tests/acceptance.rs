//! Acceptance criteria for the simulator, one line per criterion.
//!
//! Runs without the libtest harness so every verdict is printed; the process
//! exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use etc_core::design::verify_lmi;
use etc_core::graph::SignedGraph;
use etc_core::linalg::{mat_exp, norm2, sym_eigen, DenseMatrix};
use etc_core::trigger::{control_input, trigger_integrand, DecayFunction};
use etc_sim::output::{EVENTS_FILE, SUMMARY_FILE};
use etc_sim::rng::SplitMix64;
use etc_sim::scenario::ScenarioConfig;
use etc_sim::sweep::{sweep, thread_budget};
use etc_sim::{load_scenario, simulate, RunArtifacts, Scenario};

const KAPPA_REGRESSION: f64 = 7.275_748_894_513_155;
const KAPPA_TOL: f64 = 1e-8;
const TABLE_MIET_RANGE: (f64, f64) = (0.022, 0.037);

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict { ok, detail: detail.into() }
}

fn golden_text() -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/six_agents.toml");
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn golden_config() -> ScenarioConfig {
    ScenarioConfig::from_toml(&golden_text()).expect("golden scenario parses")
}

fn golden() -> Scenario {
    load_scenario(&golden_text()).expect("golden scenario loads")
}

fn run(s: &Scenario) -> RunArtifacts {
    simulate(s).expect("golden run succeeds")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn golden_consensus(s: &Scenario, r: &RunArtifacts) -> Verdict {
    let x = &r.output.final_state.x;
    let agent = |i: usize| &x[2 * i..2 * i + 2];
    let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
    let err = r.summary.final_bipartite_error;
    let partition_ok = s.gauge.sigma() == [1, 1, -1, -1, -1, -1];
    let mirrored = dist(agent(0), agent(1)) < 1e-2
        && (2..6).all(|j| dist(agent(0), &neg(agent(j))) < 1e-2)
        && norm2(agent(0)) > 0.1;
    let secs = r.runtime.as_secs_f64();
    verdict(
        err < 1e-2 && partition_ok && mirrored && secs < 30.0,
        format!("bipartite error {err:.3e} < 1e-2, groups {{1,2}} vs {{3,4,5,6}} mirrored: {mirrored}, runtime {secs:.2} s"),
    )
}

fn miet_guarantee(s: &Scenario, r: &RunArtifacts) -> Verdict {
    let tol = s.params.event_tol;
    let worst = r
        .output
        .events
        .iter()
        .filter(|e| e.k > 0)
        .map(|e| e.gap - (s.design.miet_bound_i[e.agent] - 2.0 * tol))
        .fold(f64::INFINITY, f64::min);
    let positive = r.summary.agents.iter().all(|a| a.observed_miet.is_some_and(|g| g > 0.0));

    let seeds: Vec<u64> = (1..=10).collect();
    let rows = sweep(&golden_config(), &seeds, thread_budget()).expect("sweep runs");
    let (lo, hi) = (TABLE_MIET_RANGE.0 / 10.0, TABLE_MIET_RANGE.1 * 10.0);
    let minima: Vec<f64> = rows.iter().flat_map(|r| r.min_gaps.iter().flatten().copied()).collect();
    let (mn, mx) = minima.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));
    let in_range = minima.len() == 60 && mn >= lo && mx <= hi;
    verdict(
        worst >= 0.0 && positive && in_range,
        format!(
            "gap margin over ln(1+λβ)/λ − 2·tol: {worst:.3e} s; per-agent minima over 10 seeds in [{mn:.4}, {mx:.4}] s (allowed [{lo:.4}, {hi:.2}])"
        ),
    )
}

fn lmi_verification(s: &Scenario) -> Verdict {
    let p = DenseMatrix::from_rows(&[[0.9862, 0.0143], [0.0143, 0.9212]]).unwrap().scale(5.0);
    let l = DenseMatrix::from_rows(&[
        [3., -1., 2., 0., 0., 0.],
        [-1., 5., 4., 0., 0., 0.],
        [2., 4., 8., -2., 0., 0.],
        [0., 0., -2., 6., -1., -3.],
        [0., 0., 0., -1., 1., 0.],
        [0., 0., 0., -3., 0., 3.],
    ])
    .unwrap();
    // λ₂ of L itself; the gauge does not change the spectrum
    let alpha = sym_eigen(&l).unwrap().values[1];
    let kappa = verify_lmi(&s.params.a, &s.params.b, alpha, &p);
    match kappa {
        Ok(k) => verdict(
            (k - KAPPA_REGRESSION).abs() <= KAPPA_TOL && k > 0.0 && (s.design.kappa - k).abs() <= KAPPA_TOL,
            format!("λ_max = {:.12} < 0, κ = {k:.15} (pinned {KAPPA_REGRESSION}, tol {KAPPA_TOL:e})", -k),
        ),
        Err(e) => verdict(false, format!("{e}")),
    }
}

fn lyapunov_monitor() -> Verdict {
    let bound = golden().design.beta_max_bound;
    let mut config = golden_config();
    let beta = 0.9 * bound;
    config.beta = vec![beta; config.beta.len()];
    config.force_beta = false;
    let s = Scenario::new(config).expect("reduced-weight scenario loads");
    let r = run(&s);
    match (r.summary.lyapunov_max_slack, r.summary.lyapunov_tolerance) {
        (Some(slack), Some(tol)) => verdict(
            slack <= tol,
            format!("β_i = {beta:.4e} (bound {bound:.4e}): max slack {slack:.3e} ≤ {tol:.1e} over {} samples", r.output.trajectory.len()),
        ),
        _ => verdict(false, "c1/c2 undefined below the bound"),
    }
}

fn gauge_invariance(s: &Scenario) -> Verdict {
    let graph = &s.graph;
    let gauged: SignedGraph = graph.gauged(&s.gauge).unwrap();
    let h = DecayFunction::default();
    let mut rng = SplitMix64::new(77);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let xhat: Vec<f64> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let t = rng.uniform(0.0, 20.0);
        let flip = |v: &[f64]| -> Vec<f64> { v.iter().enumerate().map(|(k, c)| s.gauge.sign(k / 2) * c).collect() };
        let (z, zhat) = (flip(&x), flip(&xhat));
        for i in 0..6 {
            let gx = trigger_integrand(i, &x, &xhat, t, 0.008, &h, graph);
            let gz = trigger_integrand(i, &z, &zhat, t, 0.008, &h, &gauged);
            let ux = norm2(&control_input(i, &xhat, graph, &s.params.gain));
            let uz = norm2(&control_input(i, &zhat, &gauged, &s.params.gain));
            worst = worst.max((gx - gz).abs()).max((ux - uz).abs());
        }
    }
    verdict(worst <= 1e-12, format!("100 random states, max |x-coords − z-coords| = {worst:.2e}"))
}

/// Roots of `λ³ − c₂λ² + c₁λ − c₀` for a symmetric 3×3 matrix, via the
/// trigonometric form of the depressed cubic and one Newton polish.
fn char_poly_roots(m: &DenseMatrix) -> [f64; 3] {
    let a = |i: usize, j: usize| m[(i, j)];
    let c2 = a(0, 0) + a(1, 1) + a(2, 2);
    let c1 = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0) + a(1, 1) * a(2, 2)
        - a(1, 2) * a(2, 1);
    let c0 = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
        + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = -2.0 * c2.powi(3) / 27.0 + c2 * c1 / 3.0 - c0;
    let mut roots = if p.abs() < 1e-300 {
        [shift; 3]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        [0, 1, 2].map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos() + shift)
    };
    for x in &mut roots {
        let f = ((*x - c2) * *x + c1) * *x - c0;
        let df = (3.0 * *x - 2.0 * c2) * *x + c1;
        if df.abs() > 1e-6 {
            *x -= f / df;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn oracle_equivalence(s: &Scenario) -> Verdict {
    let mut rng = SplitMix64::new(3);
    let mut eig_err: f64 = 0.0;
    for _ in 0..200 {
        let v: Vec<f64> = (0..6).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let m = DenseMatrix::from_rows(&[[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]]).unwrap();
        let got = sym_eigen(&m).unwrap().values;
        let want = char_poly_roots(&m);
        for (g, w) in got.iter().zip(&want) {
            eig_err = eig_err.max((g - w).abs());
        }
    }

    let mut exp_err: f64 = 0.0;
    for k in 0..=100 {
        let t = 0.1 * k as f64;
        let e = mat_exp(&s.params.a, t).unwrap();
        let (c, sn) = (t.cos(), t.sin());
        let closed = [[c, sn], [-sn, c]];
        for (i, row) in closed.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                exp_err = exp_err.max((e[(i, j)] - want).abs());
            }
        }
    }

    let pair = load_scenario(
        r#"
adjacency = [[0.0, 1.0], [1.0, 0.0]]
a = [[0.0]]
b = [[1.0]]
p = [[1.0]]
beta = 1e-6
t_final = 3.0
initial_states = [[1.0], [-0.5]]
"#,
    )
    .expect("two-agent scenario loads");
    let r = run(&pair);
    let mut pair_err: f64 = 0.0;
    for (t, x) in r.output.trajectory.times.iter().zip(&r.output.trajectory.x) {
        // mean 0.25 is conserved, the difference decays like e^{-2t}
        let half = 0.75 * (-2.0 * t).exp();
        pair_err = pair_err.max((x[0] - 0.25 - half).abs()).max((x[1] - 0.25 + half).abs());
    }

    verdict(
        eig_err <= 1e-9 && exp_err <= 1e-12 && pair_err <= 1e-3,
        format!(
            "(a) eigenvalues vs cubic roots {eig_err:.1e} ≤ 1e-9, (b) rotation exp {exp_err:.1e} ≤ 1e-12, (c) two-agent consensus {pair_err:.1e} ≤ 1e-3"
        ),
    )
}

fn step_size_convergence(coarse: &RunArtifacts) -> Verdict {
    let mut config = golden_config();
    config.dt = 5e-4;
    let fine = run(&Scenario::new(config).expect("halved-step scenario loads"));
    let times = |r: &RunArtifacts, agent: usize| -> Vec<f64> {
        r.output.events.iter().filter(|e| e.agent == agent).map(|e| e.time).collect()
    };
    let mut worst: f64 = 0.0;
    let mut counts_match = true;
    let mut first_bad: Option<f64> = None;
    for agent in 0..6 {
        let (a, b) = (times(coarse, agent), times(&fine, agent));
        counts_match &= a.len() == b.len();
        for (x, y) in a.iter().zip(&b) {
            let d = (x - y).abs();
            worst = worst.max(d);
            if d >= 1e-5 {
                first_bad = Some(first_bad.map_or(*x, |f: f64| f.min(*x)));
            }
        }
    }
    let state_diff = coarse
        .output
        .final_state
        .x
        .iter()
        .zip(&fine.output.final_state.x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let detail = format!(
        "events {} vs {}, max event-time change {worst:.2e} s (first ≥ 1e-5 at t = {}), final-state change {state_diff:.2e}",
        coarse.output.events.len(),
        fine.output.events.len(),
        first_bad.map_or("-".to_string(), |t| format!("{t:.3}"))
    );
    verdict(counts_match && worst < 1e-5 && state_diff < 1e-6, detail)
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut files = Vec::new();
    for name in ["first", "second"] {
        let dir = tmp.path().join(name);
        run(&golden()).write(&dir, false).expect("artifacts written");
        let read = |f: &str| std::fs::read(dir.join(f)).expect("artifact readable");
        files.push((read(EVENTS_FILE), read(SUMMARY_FILE)));
    }
    let same = files[0] == files[1];
    verdict(same, format!("events.jsonl {} bytes, summary.json {} bytes, identical: {same}", files[0].0.len(), files[0].1.len()))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let s = golden();
    let r = run(&s);
    type Check<'a> = Box<dyn Fn() -> Verdict + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("golden scenario reaches bipartite consensus", Box::new(|| golden_consensus(&s, &r))),
        ("inter-event gaps respect the analytic lower bound", Box::new(|| miet_guarantee(&s, &r))),
        ("gain inequality holds for the given P", Box::new(|| lmi_verification(&s))),
        ("integrated Lyapunov inequality along the trajectory", Box::new(lyapunov_monitor)),
        ("trigger and control are gauge invariant", Box::new(|| gauge_invariance(&s))),
        ("small-instance oracles agree", Box::new(|| oracle_equivalence(&s))),
        ("halving the step leaves events and final state unchanged", Box::new(|| step_size_convergence(&r))),
        ("runs are byte-for-byte deterministic", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.ok {
            failed += 1;
        }
        println!("criterion {} {:<58} {}  {}", k + 1, name, if v.ok { "PASS" } else { "FAIL" }, v.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
