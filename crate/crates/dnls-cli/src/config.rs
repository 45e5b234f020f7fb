//! Run configuration: a TOML file with `[grid]`, `[equation]`, `[data]`,
//! `[checks]`, and `[output]` sections, plus an `[estimate]` section for the
//! ratio-probe subcommand. The full grammar is documented in the README.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dnls_core::diagnostics::EstimateId;
use dnls_core::{GridSpec, Side};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const INITIAL_GENERATORS: &[&str] = &["zero", "gaussian-bump", "random-smooth", "threshold"];
pub const BOUNDARY_GENERATORS: &[&str] = &["zero", "gaussian-pulse"];

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub equation: EquationBlock,
    pub data: DataBlock,
    #[serde(default)]
    pub checks: BTreeMap<String, f64>,
    pub output: OutputBlock,
    #[serde(default)]
    pub estimate: Option<EstimateBlock>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub half_length: f64,
    pub n_points: usize,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EquationBlock {
    pub alpha: f64,
    /// "full" for the whole line, "half" for the boundary problem on x > 0.
    pub domain: String,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataBlock {
    /// Initial-data generator id; see [`INITIAL_GENERATORS`].
    pub generator: String,
    /// Mandatory whenever the generator draws random numbers.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub center: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    /// Regularity index for the "threshold" generator and norm-based checks.
    #[serde(default)]
    pub sobolev_s: Option<f64>,
    /// Ensemble size for subcommands that sweep over random fields.
    #[serde(default)]
    pub count: Option<usize>,
    /// Boundary-data generator id (half domain only); defaults to "zero".
    #[serde(default)]
    pub boundary_generator: Option<String>,
    #[serde(default)]
    pub boundary_amplitude: Option<f64>,
    #[serde(default)]
    pub boundary_center: Option<f64>,
    #[serde(default)]
    pub boundary_width: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub directory: PathBuf,
    /// Any of "csv", "json"; both enabled when omitted.
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

/// Parameters for the multilinear ratio probe.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateBlock {
    pub id: String,
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub samples: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config("parse", one_line(&e.to_string())))
    }

    /// Structural validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), CliError> {
        self.grid_spec()?;
        match self.equation.domain.as_str() {
            "full" | "half" => {}
            other => {
                return Err(CliError::config(
                    "equation.domain",
                    format!("expected \"full\" or \"half\", got \"{other}\""),
                ));
            }
        }
        let gen = self.data.generator.as_str();
        if !INITIAL_GENERATORS.contains(&gen) {
            return Err(CliError::config(
                "data.generator",
                format!("unknown generator \"{gen}\"; known: {INITIAL_GENERATORS:?}"),
            ));
        }
        let randomized = matches!(gen, "random-smooth" | "threshold");
        if randomized && self.data.seed.is_none() {
            return Err(CliError::config(
                "data.seed",
                format!("seed is mandatory for the randomized generator \"{gen}\""),
            ));
        }
        if gen == "threshold" && self.data.sobolev_s.is_none() {
            return Err(CliError::config(
                "data.sobolev_s",
                "the threshold generator needs a regularity index",
            ));
        }
        if let Some(bgen) = self.data.boundary_generator.as_deref() {
            if !BOUNDARY_GENERATORS.contains(&bgen) {
                return Err(CliError::config(
                    "data.boundary_generator",
                    format!("unknown generator \"{bgen}\"; known: {BOUNDARY_GENERATORS:?}"),
                ));
            }
        }
        for (name, tol) in &self.checks {
            if !(tol.is_finite() && *tol > 0.0) {
                return Err(CliError::config(
                    &format!("checks.{name}"),
                    format!("tolerance must be positive and finite, got {tol}"),
                ));
            }
        }
        for fmt in &self.output.formats {
            if fmt != "csv" && fmt != "json" {
                return Err(CliError::config(
                    "output.formats",
                    format!("unknown format \"{fmt}\"; known: csv, json"),
                ));
            }
        }
        if let Some(est) = &self.estimate {
            if EstimateId::parse(&est.id).is_none() {
                return Err(CliError::config(
                    "estimate.id",
                    format!(
                        "unknown estimate \"{}\"; known: quintic, cubic-derivative, \
                         boundary-transform, flow-derivative",
                        est.id
                    ),
                ));
            }
            if est.samples == 0 {
                return Err(CliError::config("estimate.samples", "need at least one sample"));
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(
            self.grid.half_length,
            self.grid.n_points,
            self.grid.dt,
            self.grid.n_steps,
        )
        .map_err(|e| CliError::config("grid", e.to_string()))
    }

    pub fn side(&self) -> Side {
        if self.equation.domain == "half" {
            Side::HalfLine
        } else {
            Side::FullLine
        }
    }

    pub fn estimate_id(&self) -> Option<EstimateId> {
        self.estimate.as_ref().and_then(|e| EstimateId::parse(&e.id))
    }

    /// Tolerance for a named check, if the config declares it.
    pub fn check(&self, name: &str) -> Option<f64> {
        self.checks.get(name).copied()
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.data.seed.into_iter().collect()
    }
}

/// TOML error messages span lines; the failure contract is one line.
fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}
