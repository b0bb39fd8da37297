//! Command-line driver: spectrum → simulate → moments → fit.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use commands::{FitOptions, SimOverrides};
use rollmoments::fit::Shape;

#[derive(Parser)]
#[command(name = "rollmoments", version, about = "Roll-acceleration moments of a ship in irregular head seas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SimFlags {
    /// Master seed of the realization phases (overrides simulation.master_seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of realizations (overrides simulation.realizations).
    #[arg(long)]
    realizations: Option<usize>,
    /// Simulated seconds per realization (overrides simulation.duration).
    #[arg(long)]
    duration: Option<f64>,
    /// Initial roll angle in degrees (overrides simulation.phi0).
    #[arg(long = "phi0-deg")]
    phi0_deg: Option<f64>,
}

impl SimFlags {
    fn overrides(&self) -> SimOverrides {
        SimOverrides {
            seed: self.seed,
            realizations: self.realizations,
            duration: self.duration,
            phi0_deg: self.phi0_deg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Wave and effective-wave spectra, discretized components and variances.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo ensemble statistics, histograms and state moments.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// Also write the full time series of this realization.
        #[arg(long)]
        series: Option<usize>,
    },
    /// Analytic acceleration moments from a state-moments file.
    Moments {
        /// TOML file with the nine state moments.
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sine-series orders (3, 5, 7, 9), comma separated; the last one is
        /// primary. Defaults to analysis.sine_order.
        #[arg(long = "sine-order", value_delimiter = ',')]
        sine_order: Vec<u32>,
    },
    /// Fits a PDF shape to a moment set.
    Fit {
        /// TOML file with m1..m4 (m3/m4 may be omitted and are then closed).
        #[arg(long)]
        moments: PathBuf,
        /// type1, type2 or gaussian.
        #[arg(long)]
        shape: Shape,
        /// Weights l1,l2,l3,l4 of the moment residuals.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
        /// Seed of the optimizer restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Label of the target in the fit report (defaults to the file path).
        #[arg(long)]
        provenance: Option<String>,
    },
    /// Runs every stage and writes comparison tables.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sim: SimFlags,
        /// State moments from an external moment-equation solution.
        #[arg(long = "moment-eq")]
        moment_eq: Option<PathBuf>,
    },
}

fn weights(w: &Option<Vec<f64>>) -> Result<Option<[f64; 4]>> {
    match w {
        None => Ok(None),
        Some(v) => match <[f64; 4]>::try_from(v.as_slice()) {
            Ok(a) => Ok(Some(a)),
            Err(_) => bail!("--weights takes exactly four values, got {}", v.len()),
        },
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum { config, out } => commands::spectrum(&config, &out),
        Command::Simulate {
            config,
            out,
            sim,
            series,
        } => commands::simulate(&config, &out, &sim.overrides(), series),
        Command::Moments {
            state,
            config,
            out,
            sine_order,
        } => commands::moments(&state, &config, &out, &sine_order),
        Command::Fit {
            moments,
            shape,
            weights: w,
            out,
            seed,
            provenance,
        } => {
            let opts = FitOptions {
                shape,
                weights: weights(&w)?,
                seed,
                provenance,
            };
            commands::fit(&moments, &out, &opts)
        }
        Command::Pipeline {
            config,
            out,
            sim,
            moment_eq,
        } => commands::pipeline(&config, &out, &sim.overrides(), moment_eq.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<run::MissingInput>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
