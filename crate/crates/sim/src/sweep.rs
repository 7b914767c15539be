use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::scenario::{Scenario, ScenarioConfig};
use crate::{simulate, Result};

/// Environment variable bounding the number of sweep worker threads.
pub const THREADS_ENV: &str = "ETC_SIM_THREADS";

/// Worker count: `ETC_SIM_THREADS` when set to a positive integer, else the
/// available parallelism.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// One seed of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub min_gaps: Vec<Option<f64>>,
    pub event_count: usize,
    pub final_bipartite_error: f64,
    pub pass: bool,
}

/// Runs `config` once per seed on at most `threads` threads. Rows come back
/// in seed order regardless of scheduling.
pub fn sweep(config: &ScenarioConfig, seeds: &[u64], threads: usize) -> Result<Vec<SweepRow>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    let workers = threads.clamp(1, seeds.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                let row = run_seed(config, seed);
                slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(row);
            });
        }
    });
    slots
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.expect("every seed is claimed by a worker"))
        .collect()
}

fn run_seed(config: &ScenarioConfig, seed: u64) -> Result<SweepRow> {
    let mut config = config.clone();
    config.seed = seed;
    let scenario = Scenario::new(config)?;
    let run = simulate(&scenario)?;
    Ok(SweepRow {
        seed,
        min_gaps: run.summary.agents.iter().map(|a| a.observed_miet).collect(),
        event_count: run.summary.total_events,
        final_bipartite_error: run.summary.final_bipartite_error,
        pass: run.summary.pass,
    })
}
