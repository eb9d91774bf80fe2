//! Command-line driver for the lattice simulator.
//!
//! Exit codes: 0 on success, 1 for configuration problems, 2 for numeric
//! failures during integration, 3 for I/O failures.

use clap::{Args, Parser, Subcommand};
use latspace::error::Error;
use latspace::scenario::{
    apply_override, catalog, preset, run, FileFormat, Observable, RunOptions, Scenario,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "latspace",
    version,
    about = "Lattice Bose-Hubbard mean-field dynamics and analog-spacetime diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON configuration file
    Run {
        /// Path to the scenario configuration
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a shipped preset scenario
    Preset {
        /// Preset name; see `list-presets`
        name: String,
        /// Override one configuration value, repeatable
        /// (e.g. --override integrator.steps=100)
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the shipped presets
    ListPresets,
    /// Parse and validate a configuration without running it
    Validate {
        /// Path to the scenario configuration
        config: PathBuf,
    },
    /// Run only the dispersion extraction of a configuration
    Dispersion {
        /// Path to a scenario configuration with a dispersion section
        config: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Output directory (default: runs/<scenario-name>)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artifact format: csv, json, or bin
    #[arg(long)]
    format: Option<String>,
    /// Seed recorded in the run manifest
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress warnings and the completion summary
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NumericAbort { .. } => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, output } => {
            let scenario = Scenario::load(&config)?;
            run_scenario(&scenario, &output)
        }
        Command::Preset { name, overrides, output } => {
            let scenario = load_preset(&name, &overrides)?;
            run_scenario(&scenario, &output)
        }
        Command::ListPresets => {
            for (name, description) in catalog() {
                println!("{name:<24} {description}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let scenario = Scenario::load(&config)?;
            for warning in scenario.warnings() {
                eprintln!("warning: {warning}");
            }
            println!("configuration ok: {}", scenario.name);
            Ok(())
        }
        Command::Dispersion { config, output } => {
            let mut scenario = Scenario::load(&config)?;
            if scenario.dispersion.is_none() {
                return Err(Error::config(format!(
                    "{} has no dispersion section",
                    config.display()
                )));
            }
            scenario.output.observables = vec![Observable::Dispersion];
            scenario.check()?;
            run_scenario(&scenario, &output)
        }
    }
}

fn load_preset(name: &str, overrides: &[String]) -> Result<Scenario, Error> {
    let base = preset(name)?;
    if overrides.is_empty() {
        return Ok(base);
    }
    let mut value = serde_json::to_value(&base)
        .map_err(|e| Error::config(format!("cannot serialize preset: {e}")))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    let scenario: Scenario = serde_json::from_value(value)
        .map_err(|e| Error::config(format!("overrides produce an invalid scenario: {e}")))?;
    scenario.check()?;
    Ok(scenario)
}

fn run_scenario(scenario: &Scenario, output: &OutputArgs) -> Result<(), Error> {
    let mut opts = RunOptions::new(
        output
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&scenario.name)),
    );
    opts.format = match &output.format {
        Some(text) => Some(text.parse::<FileFormat>()?),
        None => None,
    };
    opts.seed = output.seed;

    let manifest = run(scenario, &opts)?;
    if !output.quiet {
        for warning in &manifest.warnings {
            eprintln!("warning: {warning}");
        }
        println!(
            "completed {}: {} artifacts in {}",
            manifest.name,
            manifest.artifacts.len(),
            opts.out_dir.display()
        );
    }
    Ok(())
}
