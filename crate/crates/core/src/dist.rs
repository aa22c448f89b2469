//! Random variate generation and density evaluation.
//!
//! Streams are ChaCha8 keyed by a 64-bit seed with a 64-bit stream selector,
//! so `(seed, stream_id)` pairs never overlap and replications can run on any
//! thread without changing their draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{config, Error, Result};
use crate::grid::DensityGrid;

/// A parametric law for inter-arrival or service times.
///
/// In configuration files the law is a tagged table, e.g. `{kind = "exp", rate = 3.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum DistributionSpec {
    #[serde(rename = "exp")]
    Exponential { rate: f64 },
    #[serde(rename = "det")]
    Deterministic { value: f64 },
    #[serde(rename = "gamma")]
    Gamma { shape: f64, rate: f64 },
    #[serde(rename = "uniform")]
    Uniform { lo: f64, hi: f64 },
    #[serde(rename = "hyperexp")]
    Hyperexponential { weights: Vec<f64>, rates: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        config(format!("{name} must be finite and > 0, got {v}"))
    }
}

impl DistributionSpec {
    pub fn exp(rate: f64) -> Self {
        DistributionSpec::Exponential { rate }
    }

    pub fn det(value: f64) -> Self {
        DistributionSpec::Deterministic { value }
    }

    pub fn gamma(shape: f64, rate: f64) -> Self {
        DistributionSpec::Gamma { shape, rate }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Deterministic { .. } => "deterministic",
            DistributionSpec::Gamma { .. } => "gamma",
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::Hyperexponential { .. } => "hyperexponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::Exponential { rate } => positive("rate", *rate),
            DistributionSpec::Deterministic { value } => positive("value", *value),
            DistributionSpec::Gamma { shape, rate } => {
                positive("shape", *shape)?;
                positive("rate", *rate)
            }
            DistributionSpec::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                    return config(format!("uniform needs 0 <= lo < hi, got [{lo}, {hi}]"));
                }
                Ok(())
            }
            DistributionSpec::Hyperexponential { weights, rates } => {
                if weights.is_empty() || weights.len() != rates.len() {
                    return config("hyperexponential needs equal, non-empty weights and rates");
                }
                for w in weights {
                    if !(0.0..=1.0).contains(w) {
                        return config(format!("hyperexponential weight {w} outside [0, 1]"));
                    }
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return config(format!("hyperexponential weights sum to {total}, not 1"));
                }
                for r in rates {
                    positive("rate", *r)?;
                }
                Ok(())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / rate,
            DistributionSpec::Deterministic { value } => *value,
            DistributionSpec::Gamma { shape, rate } => shape / rate,
            DistributionSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
            DistributionSpec::Hyperexponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w / r).sum()
            }
        }
    }

    /// Second raw moment.
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    pub fn variance(&self) -> f64 {
        match self {
            DistributionSpec::Exponential { rate } => 1.0 / (rate * rate),
            DistributionSpec::Deterministic { .. } => 0.0,
            DistributionSpec::Gamma { shape, rate } => shape / (rate * rate),
            DistributionSpec::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            DistributionSpec::Hyperexponential { weights, rates } => {
                let m2: f64 = weights
                    .iter()
                    .zip(rates)
                    .map(|(w, r)| 2.0 * w / (r * r))
                    .sum();
                m2 - self.mean().powi(2)
            }
        }
    }

    /// Density at `x`, or `None` for a law with an atom.
    pub fn density(&self, x: f64) -> Option<f64> {
        if x < 0.0 {
            return match self {
                DistributionSpec::Deterministic { .. } => None,
                _ => Some(0.0),
            };
        }
        Some(match self {
            DistributionSpec::Exponential { rate } => rate * (-rate * x).exp(),
            DistributionSpec::Deterministic { .. } => return None,
            DistributionSpec::Gamma { shape, rate } => {
                if x == 0.0 {
                    if *shape < 1.0 {
                        f64::INFINITY
                    } else if *shape == 1.0 {
                        *rate
                    } else {
                        0.0
                    }
                } else {
                    (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(*shape)).exp()
                }
            }
            DistributionSpec::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DistributionSpec::Hyperexponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * (-r * x).exp())
                .sum(),
        })
    }

    /// Validates once and returns a fast sampler.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let bad = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        Ok(match self {
            DistributionSpec::Exponential { rate } => {
                Sampler::Exp(Exp::new(*rate).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Deterministic { value } => Sampler::Det(*value),
            DistributionSpec::Gamma { shape, rate } => {
                Sampler::Gamma(Gamma::new(*shape, 1.0 / rate).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Uniform { lo, hi } => {
                Sampler::Uniform(Uniform::new(*lo, *hi).map_err(|e| bad(&e))?)
            }
            DistributionSpec::Hyperexponential { weights, rates } => {
                let mut cum = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for w in weights {
                    acc += w;
                    cum.push(acc);
                }
                let branches = rates
                    .iter()
                    .map(|r| Exp::new(*r).map_err(|e| bad(&e)))
                    .collect::<Result<Vec<_>>>()?;
                Sampler::Hyper { cum, branches }
            }
        })
    }
}

/// A validated law ready for repeated sampling.
#[derive(Debug, Clone)]
pub enum Sampler {
    Exp(Exp<f64>),
    Det(f64),
    Gamma(Gamma<f64>),
    Uniform(Uniform<f64>),
    Hyper {
        cum: Vec<f64>,
        branches: Vec<Exp<f64>>,
    },
}

impl Sampler {
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Det(v) => *v,
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
            Sampler::Hyper { cum, branches } => {
                // Consume the branch draw even for a single branch so the
                // stream layout does not depend on the branch count.
                let u: f64 = rng.random();
                let i = cum
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(branches.len() - 1);
                branches[i].sample(rng)
            }
        }
    }
}

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub fn make_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(seed);
    inner.set_stream(stream_id);
    RngStream {
        seed,
        stream_id,
        inner,
    }
}

/// Draws one variate, validating `spec` first.
pub fn sample(spec: &DistributionSpec, stream: &mut RngStream) -> Result<f64> {
    Ok(spec.sampler()?.sample(stream))
}

/// Tabulates the density of `spec` on `n` uniform nodes over `[lo, hi]`.
pub fn density_grid(spec: &DistributionSpec, lo: f64, hi: f64, n: usize) -> Result<DensityGrid> {
    spec.validate()?;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return config(format!(
            "density grid needs 0 <= lo < hi and n >= 2, got [{lo}, {hi}], n = {n}"
        ));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let x = lo + i as f64 * h;
        let v = spec
            .density(x)
            .ok_or_else(|| Error::NoDensity(spec.name().to_string()))?;
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "{} density is {v} at x = {x}",
                spec.name()
            )));
        }
        values.push(v);
    }
    DensityGrid::one_d(lo, hi, values)
}
