//! Age of Computing (AoC) for communication-and-computation tandems.
//!
//! The crate covers four views of the same metric:
//!
//! * [`tandem`]: exact sample-path simulation of a two-stage FCFS line.
//! * [`closed_form`] and [`gg`]: analytic values for M/M/1 and general tandems.
//! * [`pareto`]: the freshness/throughput trade-off over the arrival rate.
//! * [`slotted`]: a discrete-time multi-source network with Max-Weight scheduling.
//!
//! ```
//! use aoc_core::closed_form::{theta_soft_mm1, MM1Params};
//!
//! let p = MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap();
//! assert!((theta_soft_mm1(&p) - 2.4705).abs() < 1e-4);
//! ```

pub mod closed_form;
pub mod dist;
pub mod error;
pub mod gg;
pub mod grid;
pub mod pareto;
pub mod slotted;
pub mod stats;
pub mod tandem;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// How a task that overshoots its deadline is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeadlineKind {
    /// Late results still count but age the consumer by the overshoot.
    Soft,
    /// Late results are discarded.
    Hard,
}

impl DeadlineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeadlineKind::Soft => "soft",
            DeadlineKind::Hard => "hard",
        }
    }
}

impl std::fmt::Display for DeadlineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DeadlineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(DeadlineKind::Soft),
            "hard" => Ok(DeadlineKind::Hard),
            _ => Err(Error::Config(format!(
                "deadline must be `soft` or `hard`, got `{s}`"
            ))),
        }
    }
}
