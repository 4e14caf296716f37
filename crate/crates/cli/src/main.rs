use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lhm_meshless::config::ScenarioConfig;
use lhm_meshless::scenario::{run_scenario, sweep, RunOutput, SweepParam};
use lhm_meshless::validate::{run_suite, Suite};
use lhm_meshless::Error;

#[derive(Parser)]
#[command(name = "lhm", version, about = "Dispersive meshless time-domain solver for Drude slabs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); defaults reproduce the perfect-lens run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of time steps, overriding `time.steps`.
    #[arg(long)]
    steps: Option<u64>,
    /// Snapshot times in seconds, overriding `output.snapshot_times_s`.
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run(Common),
    /// Run once per parameter value, comparing each with the reference grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// nodes_per_axis, alpha_c, dt_divisor or stencil_size.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run invariant suites and print a JSON report.
    Validate {
        #[command(flatten)]
        common: Common,
        /// delta, derivative, pml, free-space, 3d2d, oracle, default or all.
        #[arg(long, default_value = "default")]
        suite: String,
    },
    /// Run one scenario with the reference-grid comparison enabled.
    CompareFdtd(Common),
}

enum Failure {
    Validation,
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(times) = &common.snapshot_times {
        cfg.output.snapshot_times_s = times.clone();
    }
    if let Some(steps) = common.steps {
        cfg.time.steps = steps;
        if common.snapshot_times.is_none() {
            let horizon = cfg.horizon() + 0.5 * cfg.dt();
            let (keep, drop): (Vec<f64>, Vec<f64>) = cfg.output.snapshot_times_s.iter().partition(|&&t| t <= horizon);
            for t in drop {
                eprintln!("note: snapshot at {t:e} s lies beyond {steps} steps and is skipped");
            }
            cfg.output.snapshot_times_s = keep;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(out: &RunOutput, average_from: f64) {
    println!("wrote {} files to {}", out.files.len(), out.dir.display());
    for (t, r) in &out.focal {
        match r.errors() {
            Some((a, b)) => println!(
                "snapshot {t:e} s: foci errors {a:.2} / {b:.2} node spacings ({})",
                if r.within(1.0) { "within one spacing" } else { "outside one spacing" }
            ),
            None => println!("snapshot {t:e} s: two foci not found"),
        }
    }
    if let Some(avg) = out.time_averaged_l2(average_from) {
        println!("time-averaged image-plane L2 {avg:.4e}");
    }
    println!("wall time {:.2} s", out.wall_time_s);
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            summarize(&run_scenario(&cfg)?, cfg.analysis.average_from_s);
        }
        Command::CompareFdtd(common) => {
            let mut cfg = load(&common)?;
            cfg.reference.enabled = true;
            summarize(&run_scenario(&cfg)?, cfg.analysis.average_from_s);
        }
        Command::Sweep { common, param, values } => {
            let cfg = load(&common)?;
            let param: SweepParam = param.parse()?;
            let rows = sweep(&cfg, param, &values)?;
            println!("{:>14} {:>18} {:>14}", param.name(), "time_averaged_l2", "final_l2");
            for r in rows {
                let f = |v: Option<f64>| v.map_or("n/a".into(), |v| format!("{v:.4e}"));
                println!("{:>14} {:>18} {:>14}", r.value, f(r.time_averaged_l2), f(r.final_l2));
            }
            println!("summary in {}", cfg.output.dir.join("sweep_summary.csv").display());
        }
        Command::Validate { common, suite } => {
            let cfg = load(&common)?;
            let suite: Suite = suite.parse()?;
            let report = run_suite(suite, &cfg)?;
            let json = report.to_json();
            println!("{json}");
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.display().to_string(), source: e })?;
                let path = dir.join("validate_report.json");
                std::fs::write(&path, &json).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
            }
            if !report.passed {
                return Err(Failure::Validation);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e @ Error::NonFinite { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
