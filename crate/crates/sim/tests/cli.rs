use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etc_sim::output::{read_events, read_trajectory, EVENTS_FILE, SUMMARY_FILE, TRAJECTORY_FILE};
use etc_sim::{load_scenario, simulate, SummaryReport};

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/six_agents.toml")
}

fn etc_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etc-sim")).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const PAIR: &str = r#"
adjacency = [[0.0, 1.0], [1.0, 0.0]]
a = [[0.0]]
b = [[1.0]]
p = [[1.0]]
beta = 1e-4
t_final = 4.0
initial_states = [[1.0], [-0.5]]
"#;

#[test]
fn check_accepts_the_shipped_scenario() {
    let out = etc_sim(&["check", "--scenario", golden_path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let echoed = String::from_utf8(out.stdout).unwrap();
    assert!(echoed.contains("gain_mode = \"verify\""));
    assert!(echoed.contains("force_beta = true"));
}

#[test]
fn unbalanced_triangle_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = PAIR
        .replace("[[0.0, 1.0], [1.0, 0.0]]", "[[0.0, 1.0, -1.0], [1.0, 0.0, 1.0], [-1.0, 1.0, 0.0]]")
        .replace("[[1.0], [-0.5]]", "[[1.0], [-0.5], [0.2]]");
    let path = write_scenario(tmp.path(), "triangle.toml", &text);
    let out = etc_sim(&["run", "--scenario", &path, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not structurally balanced"), "{stderr}");
    assert!(stderr.contains("[0, 1, 2]") || stderr.contains("cycle"), "{stderr}");
}

#[test]
fn design_prints_the_constants() {
    let out = etc_sim(&["design", "--scenario", golden_path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["kappa"].as_f64().unwrap() - 7.275748894513155).abs() < 1e-8);
    assert_eq!(v["c1"], serde_json::Value::Null);
    assert_eq!(v["sigma"], serde_json::json!([1, 1, -1, -1, -1, -1]));
}

#[test]
fn oversized_beta_without_force_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "big.toml", &PAIR.replace("beta = 1e-4", "beta = 1e6"));
    let out = etc_sim(&["check", "--scenario", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissible bound"));
    let out = etc_sim(&["run", "--scenario", &path, "--force-beta", "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    // enormous weights never trigger again, so the pair stops converging
    assert_eq!(out.status.code(), Some(1));
    let summary: SummaryReport =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o").join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary.total_events, 2);
    assert_eq!(summary.max_fire_accumulator, None);
}

#[test]
fn golden_run_writes_round_trippable_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("golden");
    let out = etc_sim(&["run", "--scenario", golden_path().to_str().unwrap(), "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let scenario = load_scenario(&std::fs::read_to_string(golden_path()).unwrap()).unwrap();
    let run = simulate(&scenario).unwrap();
    let traj = &run.output.trajectory;

    let rows = read_trajectory(&std::fs::read_to_string(dir.join(TRAJECTORY_FILE)).unwrap()).unwrap();
    assert_eq!(rows.len(), traj.len() * 6 * 2);
    for r in &rows {
        let sample = traj.times.iter().position(|&t| t == r.t).expect("sample time round-trips");
        let k = r.agent * 2 + r.component;
        assert_eq!(r.x, traj.x[sample][k]);
        assert_eq!(r.xhat, traj.xhat[sample][k]);
    }

    let events = read_events(&std::fs::read_to_string(dir.join(EVENTS_FILE)).unwrap()).unwrap();
    assert_eq!(events.len(), run.output.events.len());
    assert!(events.iter().zip(&run.output.events).all(|(a, b)| a.t == b.time && a.agent == b.agent));

    let summary: SummaryReport = serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary, run.summary);
    assert!(summary.pass);
}

#[test]
fn existing_output_directory_needs_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "pair.toml", PAIR);
    let dir = tmp.path().join("out");
    let dir = dir.to_str().unwrap();
    assert_eq!(etc_sim(&["run", "--scenario", &path, "--out-dir", dir]).status.code(), Some(0));
    let again = etc_sim(&["run", "--scenario", &path, "--out-dir", dir]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));
    assert_eq!(etc_sim(&["run", "--scenario", &path, "--out-dir", dir, "--overwrite"]).status.code(), Some(0));
}

#[test]
fn overrides_reach_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_scenario(tmp.path(), "pair.toml", PAIR);
    let dir = tmp.path().join("o");
    let out = etc_sim(&["run", "--scenario", &path, "--out-dir", dir.to_str().unwrap(), "--t-final", "3.0", "--dt", "0.002"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: SummaryReport = serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!((summary.t_final, summary.dt), (3.0, 0.002));
}

#[test]
fn overflowing_state_is_a_numeric_failure() {
    let tmp = tempfile::tempdir().unwrap();
    // an unstable open loop that never re-triggers overflows before the horizon
    let text = PAIR
        .replace("a = [[0.0]]", "a = [[800.0]]")
        .replace("p = [[1.0]]\n", "")
        .replace("beta = 1e-4", "beta = 1e6\nforce_beta = true");
    let path = write_scenario(tmp.path(), "stiff.toml", &text);
    let out = etc_sim(&["run", "--scenario", &path, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite state"));
}

#[test]
fn sweep_respects_the_thread_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let text = PAIR.replace("initial_states = [[1.0], [-0.5]]", "initial_intervals = [[0.0, 1.0], [-1.0, 0.0]]");
    let path = write_scenario(tmp.path(), "pair.toml", &text);
    let dir = tmp.path().join("sweep");
    let out = Command::new(env!("CARGO_BIN_EXE_etc-sim"))
        .args(["sweep", "--scenario", &path, "--seeds", "4", "--out-dir", dir.to_str().unwrap()])
        .env("ETC_SIM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = std::fs::read_to_string(dir.join("sweep.jsonl")).unwrap();
    let seeds: Vec<u64> = lines
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, [1, 2, 3, 4]);
}
