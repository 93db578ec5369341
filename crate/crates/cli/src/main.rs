use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use sideband_cli::config::ScenarioConfig;
use sideband_cli::output::RunReport;
use sideband_cli::scenario;
use sideband_cli::{preset, preset_names};

#[derive(Parser)]
#[command(
    name = "sideband",
    about = "Sideband cooling, state swapping, and coherent feedback control of a two-oscillator model",
    after_help = preset_help()
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

fn preset_help() -> String {
    format!("Presets: {}", preset_names().join(", "))
}

#[derive(Subcommand)]
enum Cmd {
    /// Cool the target to its steady occupation and compare with the
    /// closed-form estimate
    Cool(RunArgs),
    /// Propagate through the first state-swap minimum of the target
    /// occupation
    Swap(RunArgs),
    /// Drive the aux and report the steady displaced state of the target
    Control(RunArgs),
    /// Compare the modulated lab-frame model against the interaction picture
    ValidateFrames(RunArgs),
    /// Run a one- or two-parameter grid of cooling scenarios
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in parameter set (see the preset list below)
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for CSV and summary files
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Override the RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the engine: master_equation | trajectories | langevin
    #[arg(long)]
    engine: Option<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                ScenarioConfig::from_toml(&text)?
            }
            (None, Some(name)) => match preset(name) {
                Some(c) => c,
                None => bail!(
                    "unknown preset '{name}'; available: {}",
                    preset_names().join(", ")
                ),
            },
            (None, None) => bail!("give either --config <path> or --preset <name>"),
            (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
        };
        if let Some(seed) = self.seed {
            cfg.run.seed = Some(seed);
        }
        if let Some(engine) = &self.engine {
            cfg.run.engine = engine.clone();
        }
        Ok(cfg)
    }
}

fn print_report(report: &RunReport) {
    println!("{} [{}]", report.command, report.engine);
    for (k, v, _) in &report.metrics {
        println!("  {k} = {v:.6e}");
    }
    for n in &report.notes {
        println!("  warning: {n}");
    }
    for p in &report.csv_paths {
        println!("  csv: {}", p.display());
    }
    println!("  summary: {}", report.summary_path.display());
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (args, runner): (
        &RunArgs,
        fn(&ScenarioConfig, &std::path::Path) -> Result<RunReport>,
    ) = match &cli.command {
        Cmd::Cool(a) => (a, scenario::cmd_cool),
        Cmd::Swap(a) => (a, scenario::cmd_swap),
        Cmd::Control(a) => (a, scenario::cmd_control),
        Cmd::ValidateFrames(a) => (a, scenario::cmd_validate_frames),
        Cmd::Sweep(a) => (a, scenario::cmd_sweep),
    };
    let cfg = args.load()?;
    let report = runner(&cfg, &args.out)?;
    print_report(&report);
    Ok(())
}
