//! Batch front end for the igssm estimators: JSON-configured experiments,
//! single-step commands and CSV/JSON artifacts with provenance sidecars.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod run;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ExperimentConfig, LoadedConfig};
pub use error::CliError;
pub use experiment::{Experiment, Setup};
pub use run::{run_experiment, RunOutput, Scope};

#[derive(Debug, Parser)]
#[command(
    name = "igssm",
    version,
    about = "Sieve and hierarchical Bayes experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; also where step commands look for earlier outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured number of Monte Carlo replications.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Noise level for single-point commands (default: first grid point).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Exit with status 4 when any check fails.
    #[arg(long, global = true)]
    pub check: bool,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Full experiment: rates, MISE, concentration and tail audits.
    Run,
    /// Draw one observation.
    Simulate,
    /// Posterior summary of the stored observation.
    Posterior,
    /// Oracle and minimax dimensions, brackets and assumption report.
    Select,
    /// Dimension posterior and adaptive estimate from stored files.
    Adapt,
    /// Tail-bound audit suite.
    Audit,
    /// Rate sweep with log-log regression.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Simulate => "simulate",
            Self::Posterior => "posterior",
            Self::Select => "select",
            Self::Adapt => "adapt",
            Self::Audit => "audit",
            Self::Sweep => "sweep",
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn load(cli: &Cli) -> Result<Experiment, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut loaded = LoadedConfig::load(path)?;
    if let Some(seed) = cli.seed {
        loaded.config.seed = seed;
    }
    if let Some(reps) = cli.reps {
        loaded.config.mc.replications = reps;
    }
    loaded.config.validate()?;
    Experiment::new(loaded)
}

/// Runs one command, writes its artifacts and returns the paths written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let exp = load(cli)?;
    let cfg = exp.config();
    let (artifacts, checks) = match cli.command {
        Command::Run | Command::Sweep | Command::Audit => {
            let out = match cli.command {
                Command::Run => run_experiment(&exp, Scope::Full)?,
                Command::Sweep => run_experiment(&exp, Scope::Sweep)?,
                _ => run::run_audit(&exp)?,
            };
            if !cli.quiet {
                print_summary(&out);
            }
            (out.artifacts, out.report.checks)
        }
        Command::Simulate => (
            stages::simulate(&exp, stages::pick_eps(&exp, cli.eps)?)?,
            vec![],
        ),
        Command::Posterior => (stages::posterior(&exp, &cli.out)?, vec![]),
        Command::Select => (
            stages::select(&exp, stages::pick_eps(&exp, cli.eps)?)?,
            vec![],
        ),
        Command::Adapt => (stages::adapt(&exp, &cli.out)?, vec![]),
    };
    let written = output::write_all(
        &cli.out,
        &artifacts,
        cli.command.name(),
        &cfg.name,
        &cfg.hash(),
        cfg.seed,
    )?;
    if cli.check {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect();
        if !failed.is_empty() {
            return Err(CliError::Check(failed.join(", ")));
        }
    }
    Ok(written)
}

fn print_summary(out: &RunOutput) {
    if let Some(rates) = &out.report.rates {
        for (name, fit) in &rates.fits {
            match fit.theoretical {
                Some(t) => println!(
                    "{name}: slope {:.4} (theoretical {t:.4}, R² {:.4})",
                    fit.log_adjusted_slope.unwrap_or(fit.slope),
                    fit.r_squared
                ),
                None => println!("{name}: slope {:.4} (logarithmic regime)", fit.slope),
            }
        }
    }
    for c in &out.report.checks {
        println!(
            "{} {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
}
