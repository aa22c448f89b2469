//! Experiment harness on top of [`aoc_core`]: TOML configs, figure presets,
//! analytic-against-simulation reports and deterministic SVG plots.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod plot;

pub use error::{LabError, Result};

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(LabError::Config("--threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| LabError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
