//! TOML configuration, one table per subcommand.
//!
//! ```toml
//! [run]
//! replications = 5
//!
//! [analytic]
//! lambda = [0.2, 0.4]
//! mu_t = 2.0
//! mu_c = 3.0
//! w = 0.5
//! ```
//!
//! Unknown keys are rejected; parse errors carry the line and column.

use std::path::Path;

use aoc_core::dist::DistributionSpec;
use aoc_core::slotted::SlottedConfig;
use aoc_core::tandem::TandemConfig;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::experiment::ExperimentConfig;
use crate::plot::PlotSpec;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub replications: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    pub lambda: Vec<f64>,
    pub mu_t: f64,
    pub mu_c: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GgSource {
    /// Exponential laws tabulated in closed form.
    Mm1,
    /// Joint densities estimated from a tandem run with the given laws.
    Records,
}

fn default_n() -> usize {
    aoc_core::gg::DEFAULT_N
}

fn default_calibration() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GgSection {
    pub source: GgSource,
    pub w: f64,
    #[serde(default = "default_n")]
    pub n: usize,
    /// `mm1` only.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub mu_t: Option<f64>,
    #[serde(default)]
    pub mu_c: Option<f64>,
    /// `records` only.
    #[serde(default)]
    pub arrival: Option<DistributionSpec>,
    #[serde(default)]
    pub transmit: Option<DistributionSpec>,
    #[serde(default)]
    pub compute: Option<DistributionSpec>,
    #[serde(default = "default_calibration")]
    pub calibration_tasks: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_resolution() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParetoSection {
    pub mu_t: f64,
    pub mu_c: f64,
    pub w: f64,
    /// Ascending throughput floors.
    pub u: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    #[serde(default)]
    pub run: RunSection,
    pub analytic: Option<AnalyticSection>,
    pub tandem: Option<TandemConfig>,
    pub slotted: Option<SlottedConfig>,
    pub gg: Option<GgSection>,
    pub pareto: Option<ParetoSection>,
    pub experiment: Option<ExperimentConfig>,
    pub plot: Option<PlotSpec>,
}

impl LabConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    /// The table `name`, or a config error saying it is missing.
    pub fn section<'a, T>(opt: &'a Option<T>, name: &str) -> Result<&'a T> {
        opt.as_ref()
            .ok_or_else(|| LabError::Config(format!("missing [{name}] table")))
    }
}
