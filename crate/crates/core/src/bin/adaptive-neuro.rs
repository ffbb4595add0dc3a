use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adaptive_neuro::experiments::{diagnose_trajectory, run_scenario, RunMode, ScenarioConfig};
use adaptive_neuro::integrator::Trajectory;
use adaptive_neuro::presets::PRESET_NAMES;
use adaptive_neuro::Error;

/// Simulate conductance-based neurons and estimate their parameters online.
#[derive(Debug, Parser)]
#[command(name = "adaptive-neuro", version)]
struct Cli {
    /// Override the noise seed of the scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the integration step (ms).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Directory receiving `<scenario>/` output folders.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the plant of a scenario.
    Simulate { config: PathBuf },
    /// Run the plant together with the scenario's observer.
    Estimate { config: PathBuf },
    /// Sweep the output-error cost as configured in `[landscape]`.
    Landscape { config: PathBuf },
    /// Recompute diagnostics of a trajectory written by `estimate`.
    Diagnose {
        trajectory: PathBuf,
        /// Scenario config; defaults to `config.toml` next to the trajectory.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the names of the built-in models.
    ListPresets,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn load(path: &Path, cli: &Cli) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = cli.dt {
        cfg.dt_ms = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let mode = match &cli.command {
        Command::ListPresets => {
            PRESET_NAMES.iter().for_each(|p| println!("{p}"));
            return Ok(());
        }
        Command::Diagnose { trajectory, config } => {
            let cfg_path = config
                .clone()
                .unwrap_or_else(|| trajectory.with_file_name("config.toml"));
            let cfg = load(&cfg_path, &cli)?;
            let report = diagnose_trajectory(&cfg, &Trajectory::read_csv(trajectory)?)?;
            let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
            println!("{json}");
            return Ok(());
        }
        Command::Simulate { .. } => RunMode::Simulate,
        Command::Estimate { .. } => RunMode::Estimate,
        Command::Landscape { .. } => RunMode::Landscape,
    };
    let (Command::Simulate { config } | Command::Estimate { config } | Command::Landscape { config }) = &cli.command
    else {
        unreachable!()
    };
    let cfg = load(config, &cli)?;
    let result = run_scenario(&cfg, mode, Some(&cli.out_dir))?;
    let json = serde_json::to_string_pretty(&result.summary).map_err(|e| Error::Config(e.to_string()))?;
    println!("{json}");
    Ok(())
}
