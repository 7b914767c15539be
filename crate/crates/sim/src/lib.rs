//! Scenario files, run artifacts and the `etc-sim` command line on top of
//! [`etc_core`].

// `!(x > y)` is used on purpose so NaN fails every validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;
use std::time::{Duration, Instant};

use etc_core::sim::{run, SimOutput};

mod error;
pub mod output;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use error::{Result, SimError};
pub use report::SummaryReport;
pub use scenario::{load_scenario, Scenario, ScenarioConfig};

/// A finished run and its summary.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output: SimOutput,
    pub summary: SummaryReport,
    pub runtime: Duration,
}

impl RunArtifacts {
    pub fn report_text(&self) -> String {
        self.summary.render_text(self.runtime.as_secs_f64())
    }

    /// Writes every artifact into `dir`.
    pub fn write(&self, dir: &Path, overwrite: bool) -> Result<()> {
        output::prepare_out_dir(dir, overwrite)?;
        output::write_outputs(
            dir,
            &self.output.trajectory,
            &self.output.events,
            &self.summary,
            &self.report_text(),
        )
    }
}

/// Simulates a validated scenario and evaluates every monitor.
pub fn simulate(scenario: &Scenario) -> Result<RunArtifacts> {
    let start = Instant::now();
    let output = run(&scenario.params, &scenario.x0).map_err(SimError::Simulation)?;
    let runtime = start.elapsed();
    let summary = SummaryReport::new(scenario, &output);
    Ok(RunArtifacts { output, summary, runtime })
}
