//! `rose`: CHS pulse checks, ensemble echo simulations, efficiency curves and fits.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rose_core::model::Weighting;

use commands::{CurveRange, Synthetic};
use config::{RunConfig, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rose", version, about = "Photon-echo memory simulator with adiabatic rephasing")]
struct Cli {
    /// TOML run configuration; built-in reference values are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for synthetic noisy data.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed: u64,

    /// Worker threads for ensemble and grid evaluations (results do not depend on it).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report bandwidth and adiabaticity of the rephasing pulse and dump its waveform.
    PulseCheck,
    /// Run the echo sequence over the detuning ensemble.
    Simulate,
    /// Tabulate efficiency against optical depth.
    Curve {
        #[arg(long, default_value_t = 0.0)]
        alpha_min: f64,
        #[arg(long, default_value_t = 5.0)]
        alpha_max: f64,
        #[arg(long, default_value_t = 0.01)]
        alpha_step: f64,
        /// Also write this many noisy samples of the model curve to `synthetic_data.csv`.
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
        /// Relative Gaussian noise on the synthetic samples.
        #[arg(long, default_value_t = 0.03)]
        noise: f64,
    },
    /// Fit the population and phase coefficients to measured efficiencies.
    Fit {
        /// CSV with columns alpha_L, efficiency[, sigma_alpha_L, sigma_efficiency].
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
        /// Rephasing delay; defaults to the configuration.
        #[arg(long)]
        t23_us: Option<f64>,
        /// Coherence time (`inf` allowed); defaults to the configuration.
        #[arg(long)]
        t2_us: Option<f64>,
        #[arg(long, value_enum, default_value_t = WeightingArg::Auto)]
        weighting: WeightingArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    /// Inverse-variance weights when every row has sigma_efficiency.
    Auto,
    Unweighted,
    InverseVariance,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Auto => Weighting::Auto,
            WeightingArg::Unweighted => Weighting::Unweighted,
            WeightingArg::InverseVariance => Weighting::InverseVariance,
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut s = cfg.into_settings()?;
    if let Some(out) = &cli.out {
        s.out_dir = out.clone();
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::ConfigInvalid("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    }
    let s = settings(&cli)?;
    match cli.command {
        Command::PulseCheck => commands::pulse_check(&s).map(drop),
        Command::Simulate => commands::simulate(&s).map(drop),
        Command::Curve {
            alpha_min,
            alpha_max,
            alpha_step,
            samples,
            noise,
        } => {
            let range = CurveRange {
                min: alpha_min,
                max: alpha_max,
                step: alpha_step,
            };
            let synthetic = samples.map(|samples| Synthetic {
                samples,
                noise,
                seed: cli.seed,
            });
            commands::curve(&s, range, synthetic).map(drop)
        }
        Command::Fit {
            data,
            t23_us,
            t2_us,
            weighting,
        } => {
            let t23 = t23_us.map_or(s.model.t23, |x| x * 1e-6);
            let t2 = t2_us.map_or(s.t2, |x| x * 1e-6);
            commands::fit(&data, t23, t2, weighting.into(), &s.out_dir).map(drop)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
