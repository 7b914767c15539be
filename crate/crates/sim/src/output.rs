//! Run artifacts: `trajectory.csv`, `events.jsonl`, `summary.json` and
//! `report.txt`.
//!
//! Floats are written with the shortest decimal representation that parses
//! back to the same `f64`, so re-reading a file reproduces the samples bit
//! for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use etc_core::sim::{EventRecord, Trajectory};
use serde::{Deserialize, Serialize};

use crate::report::SummaryReport;
use crate::{Result, SimError};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.txt";
pub const TRAJECTORY_HEADER: &str = "t,agent,component,x,xhat";

/// One line of `events.jsonl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub agent: usize,
    pub k: u64,
    pub t: f64,
    /// `None` for the initial broadcast.
    pub gap: Option<f64>,
}

impl From<&EventRecord> for EventLine {
    fn from(e: &EventRecord) -> Self {
        EventLine { agent: e.agent, k: e.k, t: e.time, gap: (e.k > 0).then_some(e.gap) }
    }
}

/// One row of `trajectory.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub agent: usize,
    pub component: usize,
    pub x: f64,
    pub xhat: f64,
}

/// Creates `dir`, refusing to reuse a non-empty one unless `overwrite`.
pub fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| SimError::io(dir, e))?;
        if entries.next().is_some() && !overwrite {
            return Err(SimError::OutDirExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))
}

fn create(path: PathBuf) -> Result<(BufWriter<fs::File>, PathBuf)> {
    let f = fs::File::create(&path).map_err(|e| SimError::io(&path, e))?;
    Ok((BufWriter::new(f), path))
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for ((t, x), xhat) in traj.times.iter().zip(&traj.x).zip(&traj.xhat) {
        for agent in 0..traj.agents {
            for c in 0..traj.dim {
                let k = agent * traj.dim + c;
                writeln!(w, "{t},{agent},{c},{},{}", x[k], xhat[k])?;
            }
        }
    }
    w.flush()
}

pub fn write_events<W: Write>(mut w: W, events: &[EventRecord]) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, &EventLine::from(e))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes all four artifacts into `dir`, which must already exist.
pub fn write_outputs(
    dir: &Path,
    traj: &Trajectory,
    events: &[EventRecord],
    summary: &SummaryReport,
    report_text: &str,
) -> Result<()> {
    let (w, path) = create(dir.join(TRAJECTORY_FILE))?;
    write_trajectory(w, traj).map_err(|e| SimError::io(&path, e))?;

    let (w, path) = create(dir.join(EVENTS_FILE))?;
    write_events(w, events).map_err(|e| SimError::io(&path, e))?;

    let (mut w, path) = create(dir.join(SUMMARY_FILE))?;
    let json = summary_json(summary)?;
    w.write_all(json.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| SimError::io(&path, e))?;

    let path = dir.join(REPORT_FILE);
    fs::write(&path, report_text).map_err(|e| SimError::io(&path, e))
}

/// Pretty JSON for `summary.json`; rejects non-finite numbers, which JSON
/// cannot carry.
pub fn summary_json(summary: &SummaryReport) -> Result<String> {
    if summary.floats().any(|v| !v.is_finite()) {
        return Err(SimError::Serialize { what: "summary", message: "non-finite value".into() });
    }
    let mut s = serde_json::to_string_pretty(summary)
        .map_err(|e| SimError::Serialize { what: "summary", message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

/// Parses `trajectory.csv` back into rows.
pub fn read_trajectory(text: &str) -> Result<Vec<TrajectoryRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(SimError::Schema(format!("trajectory header must be `{TRAJECTORY_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || SimError::Schema(format!("trajectory line {}: `{line}`", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            Ok(TrajectoryRow {
                t: f[0].parse().map_err(|_| bad())?,
                agent: f[1].parse().map_err(|_| bad())?,
                component: f[2].parse().map_err(|_| bad())?,
                x: f[3].parse().map_err(|_| bad())?,
                xhat: f[4].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Parses `events.jsonl`.
pub fn read_events(text: &str) -> Result<Vec<EventLine>> {
    text.lines()
        .map(|l| serde_json::from_str(l).map_err(|e| SimError::Schema(format!("event line `{l}`: {e}"))))
        .collect()
}
