//! Freshness/throughput trade-off over the arrival rate.
//!
//! For fixed `(μ_t, μ_c, w)` the problem is `min_λ Θ̂(λ)` subject to
//! `Ξ̂(λ) > u`, with both sides taken from the M/M/1 approximations. A coarse
//! scan brackets the best grid point under the lexicographic key
//! (infeasible, then `Θ̂` or `−Ξ̂`) and golden-section search refines it.

use rayon::prelude::*;

use crate::closed_form::{theta_hard_mm1_approx, throughput_mm1_approx, MM1Params};
use crate::error::{config, Error, Result};

/// Margin implementing the strict constraint `Ξ̂ > u`.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Relative slack below which two `Θ̂` values are not "strictly" ordered.
pub const THETA_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoQuery {
    pub mu_t: f64,
    pub mu_c: f64,
    pub w: f64,
    /// Throughput floor.
    pub u: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub resolution: usize,
}

impl ParetoQuery {
    /// Query over `(10⁻⁴, 1 − 10⁻⁴)·min(μ_t, μ_c)` with 256 scan points.
    pub fn new(mu_t: f64, mu_c: f64, w: f64, u: f64) -> Self {
        let m = mu_t.min(mu_c);
        ParetoQuery {
            mu_t,
            mu_c,
            w,
            u,
            lambda_lo: 1e-4 * m,
            lambda_hi: (1.0 - 1e-4) * m,
            resolution: 256,
        }
    }

    pub fn with_u(self, u: f64) -> Self {
        ParetoQuery { u, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        MM1Params::new(self.lambda_lo, self.mu_t, self.mu_c, self.w)?;
        if !(self.lambda_lo > 0.0
            && self.lambda_lo < self.lambda_hi
            && self.lambda_hi < self.mu_t.min(self.mu_c))
        {
            return config(format!(
                "lambda range ({}, {}) must lie inside (0, {})",
                self.lambda_lo,
                self.lambda_hi,
                self.mu_t.min(self.mu_c)
            ));
        }
        if self.resolution < 16 {
            return config(format!("resolution must be >= 16, got {}", self.resolution));
        }
        if !(self.u >= 0.0) {
            return config(format!("throughput floor must be >= 0, got {}", self.u));
        }
        Ok(())
    }

    fn params(&self, lambda: f64) -> MM1Params {
        MM1Params {
            lambda,
            mu_t: self.mu_t,
            mu_c: self.mu_c,
            w: self.w,
        }
    }

    pub fn theta(&self, lambda: f64) -> f64 {
        theta_hard_mm1_approx(&self.params(lambda))
    }

    pub fn xi(&self, lambda: f64) -> f64 {
        throughput_mm1_approx(&self.params(lambda))
    }

    pub fn feasible(&self, xi: f64) -> bool {
        xi >= self.u + STRICT_MARGIN
    }

    /// Evenly spaced scan points, endpoints included.
    pub fn scan_grid(&self, points: usize) -> Vec<f64> {
        let step = (self.lambda_hi - self.lambda_lo) / (points - 1) as f64;
        (0..points)
            .map(|i| self.lambda_lo + i as f64 * step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoPoint {
    pub u: f64,
    pub lambda_star: f64,
    /// `Θ̂(λ*)`, unset when infeasible.
    pub theta: Option<f64>,
    /// `Ξ̂(λ*)`, unset when infeasible.
    pub xi: Option<f64>,
    pub feasible: bool,
}

/// Lexicographic key: feasible points by `Θ̂`, infeasible ones by distance to the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    infeasible: bool,
    value: f64,
}

impl Key {
    fn less(&self, other: &Key) -> bool {
        match (self.infeasible, other.infeasible) {
            (false, true) => true,
            (true, false) => false,
            _ => self.value < other.value,
        }
    }
}

fn key(q: &ParetoQuery, lambda: f64) -> Key {
    let xi = q.xi(lambda);
    if q.feasible(xi) {
        Key {
            infeasible: false,
            value: q.theta(lambda),
        }
    } else {
        Key {
            infeasible: true,
            value: -xi,
        }
    }
}

/// Golden-section search for the smallest key on `[a, b]`, seeded with a known best.
fn golden(q: &ParetoQuery, mut a: f64, mut b: f64, mut best: (f64, Key)) -> (f64, Key) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut kc = key(q, c);
    let mut kd = key(q, d);
    for _ in 0..200 {
        if (b - a) <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        if kc.less(&kd) {
            b = d;
            d = c;
            kd = kc;
            c = b - INV_PHI * (b - a);
            kc = key(q, c);
        } else {
            a = c;
            c = d;
            kc = kd;
            d = a + INV_PHI * (b - a);
            kd = key(q, d);
        }
        for (x, k) in [(c, kc), (d, kd)] {
            if k.less(&best.1) {
                best = (x, k);
            }
        }
    }
    best
}

pub fn minimize_theta(q: &ParetoQuery) -> Result<ParetoPoint> {
    q.validate()?;
    let grid = q.scan_grid(q.resolution);
    let keys: Vec<Key> = grid.iter().map(|&l| key(q, l)).collect();
    let mut i_best = 0;
    for i in 1..grid.len() {
        if keys[i].less(&keys[i_best]) {
            i_best = i;
        }
    }
    let lo = grid[i_best.saturating_sub(1)];
    let hi = grid[(i_best + 1).min(grid.len() - 1)];
    let (lambda_star, k) = golden(q, lo, hi, (grid[i_best], keys[i_best]));
    if k.infeasible {
        return Ok(ParetoPoint {
            u: q.u,
            lambda_star,
            theta: None,
            xi: None,
            feasible: false,
        });
    }
    Ok(ParetoPoint {
        u: q.u,
        lambda_star,
        theta: Some(k.value),
        xi: Some(q.xi(lambda_star)),
        feasible: true,
    })
}

/// One point per floor in `u_grid`, evaluated in parallel and returned in order.
pub fn frontier(q_base: &ParetoQuery, u_grid: &[f64]) -> Result<Vec<ParetoPoint>> {
    if u_grid.windows(2).any(|w| w[1] < w[0]) {
        return config("u grid must be ascending");
    }
    u_grid
        .par_iter()
        .map(|&u| minimize_theta(&q_base.with_u(u)))
        .collect()
}

/// True iff no probe rate beats `point` on `Θ̂` while keeping `Ξ̂ > u`.
///
/// "Beats" means smaller by more than [`THETA_SLACK`] relative, so round-off
/// between two evaluations of the same optimum does not count.
pub fn weak_pareto_check(
    point: &ParetoPoint,
    q: &ParetoQuery,
    probe_lambdas: &[f64],
) -> Result<bool> {
    let theta = match (point.feasible, point.theta) {
        (true, Some(t)) => t,
        _ => {
            return Err(Error::Domain(
                "weak Pareto check needs a feasible point".into(),
            ))
        }
    };
    let q = q.with_u(point.u);
    let cut = theta - THETA_SLACK * theta.abs();
    Ok(!probe_lambdas
        .iter()
        .any(|&l| q.feasible(q.xi(l)) && q.theta(l) < cut))
}

/// `(λ, Ξ̂, Θ̂)` along an even sweep of the query's rate range.
pub fn lambda_sweep(q: &ParetoQuery, points: usize) -> Vec<(f64, f64, f64)> {
    q.scan_grid(points)
        .into_iter()
        .map(|l| (l, q.xi(l), q.theta(l)))
        .collect()
}

/// Rate maximizing `Ξ̂` (scan plus golden refinement).
pub fn argmax_throughput(q: &ParetoQuery) -> f64 {
    let grid = q.scan_grid(q.resolution.max(16));
    let (i, _) = grid.iter().enumerate().map(|(i, &l)| (i, q.xi(l))).fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
    );
    let mut a = grid[i.saturating_sub(1)];
    let mut b = grid[(i + 1).min(grid.len() - 1)];
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    for _ in 0..200 {
        if (b - a) <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        let c = b - INV_PHI * (b - a);
        let d = a + INV_PHI * (b - a);
        if q.xi(c) > q.xi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}
