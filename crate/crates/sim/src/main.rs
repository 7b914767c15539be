use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use etc_sim::report::DesignSummary;
use etc_sim::sweep::{sweep, thread_budget};
use etc_sim::{simulate, Result, Scenario, ScenarioConfig, SimError};

/// Event-triggered bipartite consensus simulator.
#[derive(Debug, Parser)]
#[command(name = "etc-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its artifacts.
    Run(RunArgs),
    /// Design or verify the gain and print the derived constants as JSON.
    Design(ScenarioArg),
    /// Validate a scenario and print the resolved document.
    Check(ScenarioArg),
    /// Run a scenario across consecutive seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ScenarioArg {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Accept trigger weights above the admissible bound.
    #[arg(long = "force-beta")]
    force_beta: bool,
}

impl Overrides {
    fn apply(&self, c: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(t) = self.t_final {
            c.t_final = t;
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        c.force_beta |= self.force_beta;
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Replace files in an existing output directory.
    #[arg(long)]
    overwrite: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[arg(long = "first-seed", default_value_t = 1)]
    first_seed: u64,
    /// Write `sweep.jsonl` here.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    overwrite: bool,
}

fn read_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io { path: path.to_path_buf(), source: e })?;
    ScenarioConfig::from_toml(&text)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check(args) => {
            let scenario = Scenario::new(read_config(&args.scenario)?)?;
            print!("{}", scenario.config.to_toml()?);
            Ok(true)
        }
        Command::Design(args) => {
            let scenario = Scenario::new(read_config(&args.scenario)?)?;
            let summary = DesignSummary::new(&scenario.design, scenario.gauge.sigma());
            let json = serde_json::to_string_pretty(&summary)
                .map_err(|e| SimError::Serialize { what: "design", message: e.to_string() })?;
            println!("{json}");
            Ok(true)
        }
        Command::Run(args) => {
            let mut config = read_config(&args.scenario)?;
            args.overrides.apply(&mut config);
            if let Some(dir) = args.out_dir {
                config.out_dir = dir;
            }
            let scenario = Scenario::new(config)?;
            let run = simulate(&scenario)?;
            run.write(&scenario.config.out_dir, args.overwrite)?;
            print!("{}", run.report_text());
            eprintln!("artifacts written to {}", scenario.config.out_dir.display());
            Ok(run.summary.pass)
        }
        Command::Sweep(args) => {
            let config = read_config(&args.scenario)?;
            let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
            let rows = sweep(&config, &seeds, thread_budget())?;
            let mut jsonl = String::new();
            println!("{:>8} {:>8} {:>12} {:>12} {:>12}  result", "seed", "events", "min gap", "max gap", "final error");
            for r in &rows {
                let gaps: Vec<f64> = r.min_gaps.iter().flatten().copied().collect();
                let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = gaps.iter().copied().fold(0.0, f64::max);
                println!(
                    "{:>8} {:>8} {:>12.4e} {:>12.4e} {:>12.4e}  {}",
                    r.seed,
                    r.event_count,
                    lo,
                    hi,
                    r.final_bipartite_error,
                    if r.pass { "PASS" } else { "FAIL" }
                );
                jsonl.push_str(&serde_json::to_string(r).map_err(|e| SimError::Serialize { what: "sweep", message: e.to_string() })?);
                jsonl.push('\n');
            }
            if let Some(dir) = args.out_dir {
                etc_sim::output::prepare_out_dir(&dir, args.overwrite)?;
                let path = dir.join("sweep.jsonl");
                std::fs::write(&path, jsonl).map_err(|e| SimError::Io { path, source: e })?;
            }
            Ok(rows.iter().all(|r| r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
