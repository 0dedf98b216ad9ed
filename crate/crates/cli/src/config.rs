//! JSON run configuration. Every block is optional; command-line flags
//! override the values read from the file.

use std::path::{Path, PathBuf};

use coxbvm::bvm::{ReportFormat, Thresholds};
use coxbvm::priors::{PriorConfig, DEFAULT_EPSILON};
use coxbvm::survival::{BaselineHazard, CensoringLaw, CovariateLaw, TrueModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<DataSource>,
    pub prior: PriorConfig,
    pub chain: ChainBlock,
    pub diagnostics: DiagnosticsBlock,
    pub coverage: CoverageBlock,
    pub output: OutputBlock,
}

/// Where the survival records come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A `time,status,z1,...` CSV file.
    Path(PathBuf),
    Simulate(SimulateBlock),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub model: TrueModelSpec,
    pub n: usize,
    pub seed: u64,
}

impl Default for SimulateBlock {
    fn default() -> Self {
        Self { model: default_model(vec![0.5]), n: 100, seed: 1 }
    }
}

/// Exponential baseline with unit rate, `Uniform(-1, 1)` covariates and
/// `Uniform(0, 3.9)` censoring, which censors about a quarter of the records
/// when `beta0 = 0.5`.
pub fn default_model(beta0: Vec<f64>) -> TrueModelSpec {
    let covariates = vec![CovariateLaw::Uniform { low: -1.0, high: 1.0 }; beta0.len()];
    TrueModelSpec {
        beta0,
        baseline: BaselineHazard::Exponential { rate: 1.0 },
        censoring: CensoringLaw::Uniform { upper: 3.9 },
        covariates,
        tau: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainBlock {
    /// Retained `β` draws.
    pub draws: usize,
    pub burn_in: usize,
    /// Chain steps between joint `(β, A)` draws.
    pub thin: usize,
    /// Number of joint `(β, A)` draws.
    pub path_draws: usize,
    pub seed: u64,
    /// Jumps of the continuous posterior part below this size are replaced
    /// by their mean.
    pub epsilon: f64,
}

impl Default for ChainBlock {
    fn default() -> Self {
        Self { draws: 20_000, burn_in: 2_000, thin: 10, path_draws: 2_000, seed: 1, epsilon: DEFAULT_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsBlock {
    /// Explicit hazard grid; when absent the grid spans `quantiles` of the
    /// event times.
    pub grid: Option<Vec<f64>>,
    pub quantiles: [f64; 2],
    pub points: usize,
    /// Run the hazard comparison as well as the `β` comparison.
    pub hazard: bool,
    pub thresholds: Thresholds,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        Self { grid: None, quantiles: [0.2, 0.8], points: 10, hazard: true, thresholds: Thresholds::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageBlock {
    pub n: usize,
    pub replications: usize,
    pub level: f64,
    pub seed: u64,
    /// Retained `β` draws per replication.
    pub draws: usize,
    pub burn_in: usize,
}

impl Default for CoverageBlock {
    fn default() -> Self {
        Self { n: 500, replications: 200, level: 0.9, seed: 1, draws: 4_000, burn_in: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    /// Main artifact; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: ReportFormat,
    /// Sampled hazard paths as `draw,t,A` CSV.
    pub paths: Option<PathBuf>,
    /// KDE and limit density of `√n(β − β̂)` as CSV (`p = 1` only).
    pub density: Option<PathBuf>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { path: None, format: ReportFormat::Json, paths: None, density: None }
    }
}

impl RunConfig {
    /// Reads a configuration file. Relative data paths are resolved against
    /// the directory holding the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| CliError::Config { path: path.to_owned(), source })?;
        if let Some(DataSource::Path(p)) = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.diagnostics.thresholds.validate()?;
        let [lo, hi] = self.diagnostics.quantiles;
        if !(0.0 < lo && lo <= hi && hi <= 1.0) {
            return Err(CliError::Invalid(format!("diagnostic quantiles must satisfy 0 < lo <= hi <= 1, got [{lo}, {hi}]")));
        }
        if self.diagnostics.points == 0 {
            return Err(CliError::Invalid("diagnostics.points must be positive".into()));
        }
        if self.chain.draws == 0 || self.chain.thin == 0 || self.chain.path_draws == 0 {
            return Err(CliError::Invalid("chain draws, thin and path_draws must be positive".into()));
        }
        Ok(())
    }
}
