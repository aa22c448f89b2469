//! Quadrature for general (G/G/1-G/G/1) tandems.
//!
//! Inputs are tabulated densities: `f_X`, `f_{S_t}`, `f_{S_c}` on their own
//! grids, and two joint grids on one shared geometry, `f_{U_t,U_c}` (sojourn
//! times) and `f_{U_t,W_c}` with `W_c = U_c − S_c`. The diagonal sums
//! `η₁ = f_{U_t+U_c}` and `η₂ = f_{U_t+W_c}` are precomputed on nodes
//! `0, h, …, 2·hi`.
//!
//! The triple integral for `g₂ = E[X W_c]` is evaluated in factored form:
//! with `Ψ(x) = E[(U − x)⁺]` and `K(b) = ∫ f_{S_t}(s) Ψ_c(s + b) ds`,
//!
//! ```text
//! E[W_c | X = x] = ξ_t(x) K(0) + ∫₀ˣ f_{U_t}(x − b) K(b) db.
//! ```

use crate::closed_form::MM1Params;
use crate::dist::{density_grid, DistributionSpec};
use crate::error::{config, Error, Result};
use crate::grid::{cumtrapz, interp, tail_trapz, trapz, DensityGrid};
use crate::tandem::TaskRecord;

/// Default nodes per axis.
pub const DEFAULT_N: usize = 2001;
/// Default support, in units of the law's mean.
pub const SUPPORT_MEANS: f64 = 40.0;
/// Missing mass that triggers a warning.
pub const DEFAULT_TAIL_BUDGET: f64 = 1e-4;
/// Missing mass that is an error.
pub const TAIL_LIMIT: f64 = 0.1;
/// Allowed gap between declared rates and grid means.
pub const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct GGInputs {
    pub f_x: DensityGrid,
    pub f_st: DensityGrid,
    pub f_sc: DensityGrid,
    /// Joint density of `(U_t, U_c)`.
    pub f_ut_uc: DensityGrid,
    /// Joint density of `(U_t, U_c − S_c)`.
    pub f_ut_wc: DensityGrid,
    pub w: f64,
    pub lambda: f64,
    pub mu_t: f64,
    pub mu_c: f64,
    pub tail_budget: f64,
}

fn support(spec: &DistributionSpec, n: usize) -> Result<DensityGrid> {
    match spec {
        DistributionSpec::Deterministic { value } => {
            DensityGrid::point_mass(*value, 0.0, 2.0 * value, n)
        }
        DistributionSpec::Uniform { hi, .. } => density_grid(spec, 0.0, *hi, n),
        _ => density_grid(spec, 0.0, SUPPORT_MEANS * spec.mean(), n),
    }
}

/// Factor making the trapezoid mass of `r·e^{−rx}` on `[0, hi]` equal `1 − e^{−r·hi}`.
///
/// A coarse step relative to `1/r` otherwise overshoots by `(rh/2)·coth(rh/2)`.
fn mass_match(rate: f64, hi: f64, n: usize) -> f64 {
    let h = hi / (n - 1) as f64;
    let values: Vec<f64> = (0..n)
        .map(|i| rate * (-rate * i as f64 * h).exp())
        .collect();
    -(-rate * hi).exp_m1() / trapz(&values, h)
}

impl GGInputs {
    /// Exponential inputs: independent sojourn rates `μ − λ` per queue and a
    /// compute wait with an atom `1 − ρ_c` at zero.
    pub fn mm1(p: &MM1Params, n: usize) -> Result<Self> {
        let (a, b) = p.sojourn_rates();
        let rho_c = p.lambda / p.mu_c;
        let hi = SUPPORT_MEANS / a.min(b);
        let h = hi / (n - 1) as f64;
        let (sa, sb) = (mass_match(a, hi, n), mass_match(b, hi, n));
        let f_ut_uc = DensityGrid::from_fn_2d(0.0, hi, n, |u, v| {
            sa * a * (-a * u).exp() * sb * b * (-b * v).exp()
        })?;
        let f_ut_wc = DensityGrid::from_fn_2d(0.0, hi, n, |u, v| {
            let atom = if v == 0.0 {
                2.0 * (1.0 - rho_c) / h
            } else {
                0.0
            };
            sa * a * (-a * u).exp() * (rho_c * sb * b * (-b * v).exp() + atom)
        })?;
        Ok(GGInputs {
            f_x: support(&DistributionSpec::exp(p.lambda), n)?,
            f_st: support(&DistributionSpec::exp(p.mu_t), n)?,
            f_sc: support(&DistributionSpec::exp(p.mu_c), n)?,
            f_ut_uc,
            f_ut_wc,
            w: p.w,
            lambda: p.lambda,
            mu_t: p.mu_t,
            mu_c: p.mu_c,
            tail_budget: DEFAULT_TAIL_BUDGET,
        })
    }

    /// Joint grids estimated as histograms of a calibration run.
    ///
    /// The joint support runs to the largest sampled sojourn, so no sample is
    /// dropped; the 1-D grids are tabulated from the laws themselves.
    pub fn from_records(
        records: &[TaskRecord],
        arrival: &DistributionSpec,
        transmit: &DistributionSpec,
        compute: &DistributionSpec,
        w: f64,
        n: usize,
    ) -> Result<Self> {
        if records.is_empty() {
            return config("calibration run produced no tasks");
        }
        let top = records
            .iter()
            .map(|r| r.u_t().max(r.u_c()))
            .fold(0.0, f64::max);
        let h = top / (n - 1) as f64;
        let hi = top + h;
        let ut_uc: Vec<(f64, f64)> = records.iter().map(|r| (r.u_t(), r.u_c())).collect();
        let ut_wc: Vec<(f64, f64)> = records.iter().map(|r| (r.u_t(), r.w_c())).collect();
        Ok(GGInputs {
            f_x: support(arrival, n)?,
            f_st: support(transmit, n)?,
            f_sc: support(compute, n)?,
            f_ut_uc: DensityGrid::histogram_2d(&ut_uc, hi, n)?,
            f_ut_wc: DensityGrid::histogram_2d(&ut_wc, hi, n)?,
            w,
            lambda: 1.0 / arrival.mean(),
            mu_t: 1.0 / transmit.mean(),
            mu_c: 1.0 / compute.mean(),
            tail_budget: DEFAULT_TAIL_BUDGET,
        })
    }

    pub fn with_w(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    /// Shape, mass and rate checks; returns warnings for soft violations.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (label, g) in [
            ("f_X", &self.f_x),
            ("f_St", &self.f_st),
            ("f_Sc", &self.f_sc),
        ] {
            if g.is_2d() {
                return config(format!("{label} must be univariate"));
            }
            warnings.extend(g.check_mass(label, self.tail_budget, TAIL_LIMIT)?);
        }
        for (label, g) in [("f_UtUc", &self.f_ut_uc), ("f_UtWc", &self.f_ut_wc)] {
            if !g.is_2d() {
                return config(format!("{label} must be bivariate"));
            }
            warnings.extend(g.check_mass(label, self.tail_budget, TAIL_LIMIT)?);
        }
        let (a, b) = (&self.f_ut_uc, &self.f_ut_wc);
        if a.n != b.n || a.lo != b.lo || a.hi != b.hi {
            return config("joint grids must share lo, hi and n");
        }
        if a.lo != 0.0 {
            return config("joint grids must start at 0");
        }
        if self.w.is_nan() || self.w < 0.0 {
            return config(format!("deadline w must be >= 0, got {}", self.w));
        }
        for (label, declared, grid) in [
            ("lambda", self.lambda, &self.f_x),
            ("mu_t", self.mu_t, &self.f_st),
            ("mu_c", self.mu_c, &self.f_sc),
        ] {
            let implied = 1.0 / grid.mean();
            if (implied - declared).abs() > RATE_TOLERANCE * declared {
                return config(format!(
                    "{label}: grid implies {implied}, declared {declared}"
                ));
            }
        }
        Ok(warnings)
    }
}

/// A value with a flag set when the argument left the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub truncated: bool,
}

/// Precomputed diagonal densities and tail functions for one input set.
#[derive(Debug, Clone)]
pub struct GGAnalytic {
    pub inputs: GGInputs,
    pub warnings: Vec<String>,
    h: f64,
    eta1: Vec<f64>,
    eta2: Vec<f64>,
    cdf1: Vec<f64>,
    f_ut: Vec<f64>,
    xi_t: Vec<f64>,
    psi_t: Vec<f64>,
    psi_c: Vec<f64>,
    e_x: f64,
    e_x2: f64,
    e_st: f64,
    e_sc: f64,
}

/// `η(m h) = ∫₀^{mh} f(u, mh − u) du` on nodes `m = 0..2(n−1)`, with `f = 0` off the grid.
fn diagonal(g: &DensityGrid) -> Vec<f64> {
    let n = g.n;
    let h = g.h();
    (0..2 * n - 1)
        .map(|m| {
            if m == 0 {
                // Zero-width diagonal; only an atom at the origin of the second
                // variable leaves something here.
                return 0.5 * h * g.at(0, 0);
            }
            let i_lo = m.saturating_sub(n - 1);
            let i_hi = m.min(n - 1);
            let mut s = 0.0;
            for i in i_lo..=i_hi {
                let wt = if i == 0 || i == m { 0.5 } else { 1.0 };
                s += wt * g.at(i, m - i);
            }
            h * s
        })
        .collect()
}

/// `∫_w^{top} φ(τ) η(τ) dτ` on nodes with the partial first cell handled linearly.
fn integrate_above(eta: &[f64], h: f64, w: f64, phi: impl Fn(f64) -> f64) -> f64 {
    let top = (eta.len() - 1) as f64 * h;
    if w >= top {
        return 0.0;
    }
    let first = (w / h).floor() as usize + 1;
    let ew = interp(eta, 0.0, h, w);
    let mut s = 0.5 * (first as f64 * h - w) * (phi(w) * ew + phi(first as f64 * h) * eta[first]);
    let tail: Vec<f64> = (first..eta.len())
        .map(|m| phi(m as f64 * h) * eta[m])
        .collect();
    s += trapz(&tail, h);
    s
}

/// `∫₀^w φ(τ) η(τ) dτ`.
fn integrate_below(eta: &[f64], h: f64, w: f64, phi: impl Fn(f64) -> f64) -> f64 {
    let top = (eta.len() - 1) as f64 * h;
    let w = w.min(top);
    let last = (w / h).floor() as usize;
    let head: Vec<f64> = (0..=last).map(|m| phi(m as f64 * h) * eta[m]).collect();
    let mut s = trapz(&head, h);
    let rem = w - last as f64 * h;
    if rem > 0.0 && last + 1 < eta.len() {
        let ew = interp(eta, 0.0, h, w);
        s += 0.5 * rem * (phi(last as f64 * h) * eta[last] + phi(w) * ew);
    }
    s
}

impl GGAnalytic {
    pub fn new(inputs: GGInputs) -> Result<Self> {
        let warnings = inputs.validate()?;
        let joint = &inputs.f_ut_uc;
        let h = joint.h();
        let eta1 = diagonal(joint);
        let eta2 = diagonal(&inputs.f_ut_wc);
        let cdf1 = cumtrapz(&eta1, h);
        let f_ut = joint.row_marginal_values();
        let f_uc = joint.col_marginal_values();
        let xi_t = tail_trapz(&f_ut, h);
        let psi_t = tail_trapz(&xi_t, h);
        let psi_c = tail_trapz(&tail_trapz(&f_uc, h), h);
        let norm = |g: &DensityGrid, k: i32| g.moment(k) / g.total_mass;
        let e_x = norm(&inputs.f_x, 1);
        let e_x2 = norm(&inputs.f_x, 2);
        let e_st = norm(&inputs.f_st, 1);
        let e_sc = norm(&inputs.f_sc, 1);
        for v in [e_x, e_x2, e_st, e_sc] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Numeric(format!("grid moment {v} is not positive")));
            }
        }
        Ok(GGAnalytic {
            inputs,
            warnings,
            h,
            eta1,
            eta2,
            cdf1,
            f_ut,
            xi_t,
            psi_t,
            psi_c,
            e_x,
            e_x2,
            e_st,
            e_sc,
        })
    }

    fn eval_eta(&self, eta: &[f64], tau: f64) -> Flagged {
        let top = (eta.len() - 1) as f64 * self.h;
        if !(0.0..=top).contains(&tau) {
            return Flagged {
                value: 0.0,
                truncated: true,
            };
        }
        Flagged {
            value: interp(eta, 0.0, self.h, tau),
            truncated: false,
        }
    }

    /// Density of `T = U_t + U_c`.
    pub fn eta1(&self, tau: f64) -> Flagged {
        self.eval_eta(&self.eta1, tau)
    }

    /// Density of `T − S_c = U_t + W_c`.
    pub fn eta2(&self, tau: f64) -> Flagged {
        self.eval_eta(&self.eta2, tau)
    }

    /// Node spacing of the diagonal densities.
    pub fn eta_step(&self) -> f64 {
        self.h
    }

    pub fn eta1_nodes(&self) -> &[f64] {
        &self.eta1
    }

    pub fn eta2_nodes(&self) -> &[f64] {
        &self.eta2
    }

    /// `E[X]` implied by the arrival grid.
    pub fn mean_x(&self) -> f64 {
        self.e_x
    }

    /// `E[X W_t] = ∫ x Ψ_t(x) f_X(x) dx`.
    pub fn g1(&self) -> f64 {
        let fx = &self.inputs.f_x;
        let vals: Vec<f64> = (0..fx.n)
            .map(|i| {
                let x = fx.x(i);
                x * interp(&self.psi_t, 0.0, self.h, x) * fx.values[i]
            })
            .collect();
        trapz(&vals, fx.h()) / fx.total_mass
    }

    /// `E[W_c | X = x]` on the joint grid nodes.
    fn conditional_compute_wait(&self) -> Vec<f64> {
        let st = &self.inputs.f_st;
        let n = self.f_ut.len();
        let h = self.h;
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let b = j as f64 * h;
                let vals: Vec<f64> = (0..st.n)
                    .map(|i| st.values[i] * interp(&self.psi_c, 0.0, h, st.x(i) + b))
                    .collect();
                trapz(&vals, st.h()) / st.total_mass
            })
            .collect();
        (0..n)
            .map(|m| {
                let mut conv = 0.0;
                if m > 0 {
                    for j in 0..=m {
                        let wt = if j == 0 || j == m { 0.5 } else { 1.0 };
                        conv += wt * self.f_ut[m - j] * k[j];
                    }
                    conv *= h;
                }
                self.xi_t[m] * k[0] + conv
            })
            .collect()
    }

    /// `E[X W_c]`.
    pub fn g2(&self) -> f64 {
        let e = self.conditional_compute_wait();
        let fx = &self.inputs.f_x;
        let vals: Vec<f64> = (0..fx.n)
            .map(|i| {
                let x = fx.x(i);
                x * interp(&e, 0.0, self.h, x) * fx.values[i]
            })
            .collect();
        trapz(&vals, fx.h()) / fx.total_mass
    }

    /// `F_T(w) = ∫₀^w η₁`, clamped to `[0, 1]`.
    pub fn ft_cdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let top = (self.eta1.len() - 1) as f64 * self.h;
        let v = if w >= top {
            *self.cdf1.last().unwrap()
        } else {
            let m = (w / self.h).floor() as usize;
            let rem = w - m as f64 * self.h;
            self.cdf1[m] + 0.5 * rem * (self.eta1[m] + interp(&self.eta1, 0.0, self.h, w))
        };
        v.clamp(0.0, 1.0)
    }

    /// Soft-deadline AoC.
    pub fn theta_soft(&self) -> f64 {
        let w = self.inputs.w;
        let lambda = 1.0 / self.e_x;
        let base = self.e_st + self.e_sc + lambda * (0.5 * self.e_x2 + self.g1() + self.g2());
        if w.is_infinite() {
            return base;
        }
        let tail = integrate_above(&self.eta1, self.h, w, |_| 1.0);
        let sq = |tau: f64| (tau - w) * (tau - w);
        let diff =
            integrate_above(&self.eta1, self.h, w, sq) - integrate_above(&self.eta2, self.h, w, sq);
        base + lambda * 0.5 * tail * diff
    }

    /// Hard-deadline AoC approximation; `INFINITY` when `F_T(w) = 0`.
    pub fn theta_hard(&self) -> f64 {
        let w = self.inputs.w;
        let f = self.ft_cdf(w);
        if f <= 0.0 {
            return f64::INFINITY;
        }
        let cond = integrate_below(&self.eta1, self.h, w, |tau| tau) / f;
        cond + self.e_x2 / (2.0 * self.e_x) + (1.0 - f) / f * self.e_x
    }

    /// Computation throughput approximation `F_T(w) / E[X]`.
    pub fn throughput(&self) -> f64 {
        self.ft_cdf(self.inputs.w) / self.e_x
    }
}

pub fn eta1(m: &GGAnalytic, tau: f64) -> Flagged {
    m.eta1(tau)
}

pub fn eta2(m: &GGAnalytic, tau: f64) -> Flagged {
    m.eta2(tau)
}

pub fn g1_quadrature(inputs: &GGInputs) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.g1())
}

pub fn g2_quadrature(inputs: &GGInputs) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.g2())
}

pub fn theta_soft_gg1(inputs: &GGInputs) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.theta_soft())
}

pub fn ft_cdf(inputs: &GGInputs, w: f64) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.ft_cdf(w))
}

pub fn theta_hard_gg1_approx(inputs: &GGInputs) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.theta_hard())
}

pub fn throughput_gg1_approx(inputs: &GGInputs) -> Result<f64> {
    Ok(GGAnalytic::new(inputs.clone())?.throughput())
}
