//! Joins analytic values with simulated summaries.

use serde::Serialize;

use crate::error::{LabError, Result};

/// Which side of the simulation the analytic value is expected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    None,
    /// Analytic value should not exceed the simulation.
    Lower,
    /// Analytic value should not fall below the simulation.
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub key: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub key: String,
    pub mean: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub key: String,
    pub analytic: f64,
    pub sim_mean: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub rel_err: f64,
    pub bound_respected: bool,
}

/// `|sim − analytic| / max(|analytic|, ε)`.
pub fn relative_error(sim: f64, analytic: f64) -> f64 {
    if sim == analytic {
        return 0.0;
    }
    (sim - analytic).abs() / analytic.abs().max(f64::EPSILON)
}

/// Rows in analytic order; every key must appear on both sides exactly once.
pub fn compare_report(
    analytic: &[AnalyticRow],
    simulated: &[SimRow],
    bound: Bound,
) -> Result<Vec<ComparisonRow>> {
    if analytic.is_empty() {
        return Err(LabError::Config("empty analytic set".into()));
    }
    let mut orphans: Vec<&str> = analytic
        .iter()
        .filter(|a| !simulated.iter().any(|s| s.key == a.key))
        .map(|a| a.key.as_str())
        .collect();
    orphans.extend(
        simulated
            .iter()
            .filter(|s| !analytic.iter().any(|a| a.key == s.key))
            .map(|s| s.key.as_str()),
    );
    if !orphans.is_empty() {
        return Err(LabError::Config(format!(
            "unmatched keys: {}",
            orphans.join(", ")
        )));
    }
    analytic
        .iter()
        .map(|a| {
            let mut hits = simulated.iter().filter(|s| s.key == a.key);
            let s = hits.next().expect("checked above");
            if hits.next().is_some() {
                return Err(LabError::Config(format!("duplicate key {}", a.key)));
            }
            let bound_respected = match bound {
                Bound::None => true,
                Bound::Lower => s.mean >= a.value,
                Bound::Upper => s.mean <= a.value,
            };
            Ok(ComparisonRow {
                key: a.key.clone(),
                analytic: a.value,
                sim_mean: s.mean,
                ci95_lo: s.ci95_lo,
                ci95_hi: s.ci95_hi,
                rel_err: relative_error(s.mean, a.value),
                bound_respected,
            })
        })
        .collect()
}
