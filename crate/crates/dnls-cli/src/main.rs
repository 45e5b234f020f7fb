//! `dnls`: run configured experiments against the dnls-core library and emit
//! CSV/JSON plot data plus a manifest with content hashes.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 numerical failure
//! (blowup, lost contraction, unusable fit range), 3 a declared check failed.
//! Every failure also prints one structured line on stderr.

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dnls_core::CoreError;

use config::RunConfig;
use output::OutputWriter;

#[derive(Parser)]
#[command(name = "dnls", version, about = "Simulation and verification harness for derivative NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured data and write the conservation ledger.
    Simulate(RunArgs),
    /// Fit the dyadic smoothing exponent of the nonlinear remainder.
    SmoothingScan(RunArgs),
    /// Enforce conservation drifts; on the half domain also the boundary identities.
    ConservationCheck(RunArgs),
    /// Probe the gauge algebra (modulus, composition, inversion) on an ensemble.
    GaugeCheck(RunArgs),
    /// Measure the time regularity of free-evolution traces at fixed positions.
    KatoCheck(RunArgs),
    /// Record the fixed-point iteration of the half-line solver.
    PicardTrace(RunArgs),
    /// Check the differentiation-by-parts identity and its step refinement.
    NormalformCheck(RunArgs),
    /// Sample multilinear estimate ratios over random ensembles.
    EstimateRatio(RunArgs),
    /// Record the outer boundary-phase iteration and its consistency checks.
    GammaFixedPoint(RunArgs),
}

/// Failure taxonomy mirroring the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Config { field: String, reason: String },
    Numerical { kind: String, detail: String },
    ChecksFailed { count: usize },
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn from_core(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::BlowupDetected { .. } => "blowup",
            CoreError::NoContraction { .. } => "no-contraction",
            CoreError::OuterNoContraction { .. } => "outer-no-contraction",
            CoreError::DivisionGuard { .. } => "division-guard",
            CoreError::InsufficientRange { .. } => "insufficient-range",
            CoreError::WindowViolation { .. } => {
                return CliError::config("estimate", format!("window_violation: {e}"));
            }
            CoreError::CompatibilityViolation { .. } | CoreError::BandlimitViolation { .. } => {
                return CliError::config("data", e.to_string());
            }
            CoreError::InvalidParameter(_) | CoreError::GridMismatch(_) => {
                return CliError::config("parameters", e.to_string());
            }
        };
        CliError::Numerical {
            kind: kind.into(),
            detail: e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Numerical { .. } => 2,
            CliError::ChecksFailed { .. } => 3,
        }
    }

    /// One structured stderr line. Failed checks already printed theirs.
    fn emit(&self) {
        match self {
            CliError::Config { field, reason } => {
                eprintln!("config-error field={field} reason={reason}");
            }
            CliError::Numerical { kind, detail } => {
                eprintln!("numerical-failure kind={kind} detail={detail}");
            }
            CliError::ChecksFailed { .. } => {}
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    if let Ok(raw) = std::env::var("WORKERS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring WORKERS={raw}: expected a positive integer"),
        }
    }
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Simulate(a) => ("simulate", a),
        Command::SmoothingScan(a) => ("smoothing-scan", a),
        Command::ConservationCheck(a) => ("conservation-check", a),
        Command::GaugeCheck(a) => ("gauge-check", a),
        Command::KatoCheck(a) => ("kato-check", a),
        Command::PicardTrace(a) => ("picard-trace", a),
        Command::NormalformCheck(a) => ("normalform-check", a),
        Command::EstimateRatio(a) => ("estimate-ratio", a),
        Command::GammaFixedPoint(a) => ("gamma-fixed-point", a),
    };
    ExitCode::from(run(name, args))
}

fn run(name: &str, args: &RunArgs) -> u8 {
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            let err = CliError::config("config", format!("cannot read {}: {e}", args.config.display()));
            err.emit();
            return 1;
        }
    };
    let cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            e.emit();
            return 1;
        }
    };
    // The output directory is known from here on; the manifest is written on
    // every path, including failures.
    let mut out = match OutputWriter::create(&cfg) {
        Ok(o) => o,
        Err(e) => {
            e.emit();
            return 1;
        }
    };
    let result = cfg
        .validate()
        .and_then(|()| commands::execute(name, &cfg, &mut out));
    let code = match &result {
        Ok(()) => 0,
        Err(e) => {
            e.emit();
            e.exit_code()
        }
    };
    if let Err(e) = out.manifest(&cfg) {
        e.emit();
        return 1;
    }
    code
}
