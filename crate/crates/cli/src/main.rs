//! Command-line surface for the ring photon-pair source toolkit.
//!
//! Subcommands: `fit-resonance`, `fit-counts`, `sweep`, `predict`,
//! `simulate`. Exit codes are a stable contract: 0 success, 1 malformed
//! input, 2 no-signal or model failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ringpair::{CouplingBranch, ErrorClass};

#[derive(Parser)]
#[command(
    name = "ringpair",
    version,
    about = "Model, fit and predict micro-ring photon-pair source performance"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    /// Pulsed pump; brightness peaks at Gamma = 4M.
    Pulsed,
    /// Continuous-wave pump; brightness peaks at Gamma = 2M.
    Cw,
}

impl From<VariantArg> for ringpair::BrightnessVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Pulsed => ringpair::BrightnessVariant::PulsedOptimum4M,
            VariantArg::Cw => ringpair::BrightnessVariant::CwOptimum2M,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    LowPower,
    SharedBeta,
}

impl From<ModeArg> for ringpair::fit::FitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => ringpair::fit::FitMode::Full,
            ModeArg::LowPower => ringpair::fit::FitMode::LowPowerLinearized,
            ModeArg::SharedBeta => ringpair::fit::FitMode::SharedBeta,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BranchArg {
    Under,
    Critical,
    Over,
}

impl From<BranchArg> for CouplingBranch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Under => CouplingBranch::UnderCoupled,
            BranchArg::Critical => CouplingBranch::Critical,
            BranchArg::Over => CouplingBranch::OverCoupled,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimKind {
    /// One count sweep at fixed coupling.
    Counts,
    /// Full coupling sweep: per-voltage traces and count sweeps.
    Scenario,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a Lorentzian dip in a transmission trace and report Q factors
    /// and decay rates.
    FitResonance {
        /// Trace CSV with header `wavelength_nm,transmission`.
        #[arg(long)]
        trace: PathBuf,
        /// Device config file (`key = value`); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override single config values, e.g. `--set group_index=4.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output JSON report path.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-point residual CSV.
        #[arg(long)]
        residuals: Option<PathBuf>,
        /// Force the coupling branch instead of inferring it.
        #[arg(long, value_enum)]
        branch: Option<BranchArg>,
    },
    /// Fit the singles/coincidence count model to a power sweep.
    FitCounts {
        /// Sweep CSV with header `power_mw,integration_s,c_s,c_i,cc`.
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Fitting strategy.
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Power cutoff for low-power mode (mW).
        #[arg(long, default_value_t = 0.05)]
        low_power_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Process a directory of per-voltage datasets into a coupling-sweep
    /// summary table.
    Sweep {
        /// Directory containing `v_<voltage>/trace.csv` and
        /// `v_<voltage>/counts.csv` subdirectories.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Brightness model for the theory columns.
        #[arg(long, value_enum, default_value = "pulsed")]
        variant: VariantArg,
        /// Summary CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON summary (rows plus manifest).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Emit theory curves of escape efficiency and normalized brightness
    /// versus Gamma/M.
    Predict {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value = "pulsed")]
        variant: VariantArg,
        /// Gamma/M range as `LO:HI`.
        #[arg(long, default_value = "0.1:60")]
        range: String,
        #[arg(long, default_value_t = 600)]
        points: usize,
        /// Curve CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON report with the located maximum.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic dataset from a spec file.
    Simulate {
        /// SynthSpec JSON; `rng_seed` is required.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Override the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "scenario")]
        kind: SimKind,
        /// Output directory for the dataset and its manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::FitResonance {
            trace,
            config,
            overrides,
            out,
            residuals,
            branch,
        } => commands::fit_resonance::run(
            &trace,
            config.as_deref(),
            &overrides,
            &out,
            residuals.as_deref(),
            branch.map(Into::into),
        ),
        Command::FitCounts {
            sweep,
            config,
            overrides,
            mode,
            low_power_max,
            out,
        } => commands::fit_counts::run(
            &sweep,
            config.as_deref(),
            &overrides,
            mode.into(),
            low_power_max,
            &out,
        ),
        Command::Sweep {
            dir,
            config,
            overrides,
            variant,
            out,
            json,
        } => commands::sweep::run(
            &dir,
            config.as_deref(),
            &overrides,
            variant.into(),
            &out,
            json.as_deref(),
        ),
        Command::Predict {
            config,
            overrides,
            variant,
            range,
            points,
            out,
            json,
        } => commands::predict::run(
            config.as_deref(),
            &overrides,
            variant.into(),
            &range,
            points,
            &out,
            json.as_deref(),
        ),
        Command::Simulate {
            spec,
            config,
            overrides,
            seed,
            kind,
            out_dir,
        } => commands::simulate::run(&spec, config.as_deref(), &overrides, seed, kind, &out_dir),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let class = err
                .downcast_ref::<ringpair::Error>()
                .map(ringpair::Error::class)
                .unwrap_or(ErrorClass::Input);
            match class {
                ErrorClass::Input => ExitCode::from(1),
                ErrorClass::Model => ExitCode::from(2),
            }
        }
    }
}
