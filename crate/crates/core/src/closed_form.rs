//! Closed forms and approximations for the M/M/1-M/M/1 tandem.
//!
//! With `a = μ_t δ_t = μ_t − λ` and `b = μ_c δ_c = μ_c − λ`, the sojourn times
//! in the two queues are independent exponentials with rates `a` and `b`, and
//! every quantity below is built from `ζ_t = e^{-a w}` and `ζ_c = e^{-b w}`.
//! When `μ_t` and `μ_c` coincide the two-exponential expressions become 0/0,
//! so a separate Erlang-2 branch takes over inside the tie tolerance.

use crate::error::{Error, Result};
use crate::DeadlineKind;

/// Relative spacing below which `μ_t` and `μ_c` are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Rates and deadline of an M/M/1-M/M/1 tandem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MM1Params {
    pub lambda: f64,
    pub mu_t: f64,
    pub mu_c: f64,
    pub w: f64,
}

/// Quantities derived from [`MM1Params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub rho_t: f64,
    pub rho_c: f64,
    pub delta_t: f64,
    pub delta_c: f64,
    pub zeta_t: f64,
    pub zeta_c: f64,
}

impl MM1Params {
    /// Validates rates, stability and the deadline (`w = ∞` is allowed).
    pub fn new(lambda: f64, mu_t: f64, mu_c: f64, w: f64) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu_t", mu_t), ("mu_c", mu_c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if w.is_nan() || w < 0.0 {
            return Err(Error::Config(format!("deadline w must be >= 0, got {w}")));
        }
        let mu_min = mu_t.min(mu_c);
        if lambda >= mu_min {
            return Err(Error::Stability { lambda, mu_min });
        }
        Ok(MM1Params {
            lambda,
            mu_t,
            mu_c,
            w,
        })
    }

    pub fn with_w(self, w: f64) -> Self {
        MM1Params { w, ..self }
    }

    pub fn swapped(self) -> Self {
        MM1Params {
            mu_t: self.mu_c,
            mu_c: self.mu_t,
            ..self
        }
    }

    /// Sojourn rates `(a, b) = (μ_t − λ, μ_c − λ)`.
    pub fn sojourn_rates(&self) -> (f64, f64) {
        (
            self.mu_t * (1.0 - self.lambda / self.mu_t),
            self.mu_c * (1.0 - self.lambda / self.mu_c),
        )
    }

    pub fn derived(&self) -> Derived {
        let rho_t = self.lambda / self.mu_t;
        let rho_c = self.lambda / self.mu_c;
        let delta_t = 1.0 - rho_t;
        let delta_c = 1.0 - rho_c;
        let (zeta_t, zeta_c) = if self.w.is_infinite() {
            (0.0, 0.0)
        } else {
            (
                (-self.mu_t * delta_t * self.w).exp(),
                (-self.mu_c * delta_c * self.w).exp(),
            )
        };
        Derived {
            rho_t,
            rho_c,
            delta_t,
            delta_c,
            zeta_t,
            zeta_c,
        }
    }

    pub fn is_tie(&self) -> bool {
        (self.mu_t - self.mu_c).abs() < TIE_TOLERANCE * self.mu_t.max(self.mu_c)
    }
}

/// `Pr(Erlang(n, 1) ≤ x)`; the tail series below `x = 1` keeps small values exact.
fn erlang_cdf(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for k in 1..=n {
        term *= x / k as f64;
    }
    if x < 1.0 {
        let (mut sum, mut k) = (0.0, n as f64);
        while term > 1e-18 * sum {
            sum += term;
            k += 1.0;
            term *= x / k;
        }
        return sum * (-x).exp();
    }
    let (mut head, mut t) = (0.0, 1.0);
    for k in 0..n {
        head += t;
        t *= x / (k + 1) as f64;
    }
    -(-x).exp_m1() - (head - 1.0) * (-x).exp()
}

/// `Pr(T > w)` for the end-to-end delay `T`.
pub fn epsilon_w(p: &MM1Params) -> f64 {
    if p.w.is_infinite() {
        return 0.0;
    }
    let d = p.derived();
    let (a, b) = p.sojourn_rates();
    if p.is_tie() {
        (1.0 + a * p.w) * d.zeta_t
    } else {
        (b * d.zeta_t - a * d.zeta_c) / (p.mu_c - p.mu_t)
    }
}

/// Average AoI of the tandem (the soft AoC without deadline overshoot).
pub fn aoi_mm1_tandem(p: &MM1Params) -> f64 {
    let (l, mt, mc) = (p.lambda, p.mu_t, p.mu_c);
    1.0 / l
        + 1.0 / mt
        + 1.0 / mc
        + l * l / (mt * mt * (mt - l))
        + l * l / (mc * mc * (mc - l))
        + l * l / (mt * mc * (mt + mc - l))
}

/// Average AoC under the soft deadline.
pub fn theta_soft_mm1(p: &MM1Params) -> f64 {
    let aoi = aoi_mm1_tandem(p);
    if p.w.is_infinite() {
        return aoi;
    }
    let d = p.derived();
    let (a, b) = p.sojourn_rates();
    let extra = if p.is_tie() {
        let mu = 0.5 * (p.mu_t + p.mu_c);
        p.lambda * d.zeta_t * d.zeta_t * (1.0 + a * p.w) * (2.0 / (mu * mu * d.delta_t) + p.w / mu)
    } else {
        let k = d.delta_c * p.mu_t * d.delta_t / (p.mu_c - p.mu_t);
        p.lambda
            * p.mu_c
            * k
            * k
            * (d.zeta_t / a - d.zeta_c / b)
            * (d.zeta_t / (a * a) - d.zeta_c / (b * b))
    };
    aoi + extra
}

/// `E[T | T ≤ w]`, or `None` when `w = 0`.
pub fn conditional_delay_mean(p: &MM1Params) -> Option<f64> {
    if p.w == 0.0 {
        return None;
    }
    let (a, b) = p.sojourn_rates();
    if p.w.is_infinite() {
        return Some(1.0 / a + 1.0 / b);
    }
    let w = p.w;
    if p.is_tie() {
        // E[T 1{T ≤ w}] = (2/a)·Pr(Erlang-3 ≤ aw) for the Erlang-2 delay.
        Some(2.0 / a * erlang_cdf(3, a * w) / erlang_cdf(2, a * w))
    } else {
        let num = erlang_cdf(2, a * w) / (a * a) - erlang_cdf(2, b * w) / (b * b);
        let den = erlang_cdf(1, a * w) / a - erlang_cdf(1, b * w) / b;
        Some(num / den)
    }
}

/// Approximate average AoC under the hard deadline; `INFINITY` when `w = 0`.
pub fn theta_hard_mm1_approx(p: &MM1Params) -> f64 {
    let Some(t_m) = conditional_delay_mean(p) else {
        return f64::INFINITY;
    };
    let xi = throughput_mm1_approx(p);
    if xi <= 0.0 {
        return f64::INFINITY;
    }
    t_m + 1.0 / xi
}

/// Approximate computation throughput, `λ (1 − ε_w)`.
pub fn throughput_mm1_approx(p: &MM1Params) -> f64 {
    if p.w.is_infinite() {
        return p.lambda;
    }
    if p.w == 0.0 {
        return 0.0;
    }
    let (a, b) = p.sojourn_rates();
    if p.is_tie() {
        p.lambda * erlang_cdf(2, a * p.w)
    } else {
        p.lambda * (b * erlang_cdf(1, a * p.w) - a * erlang_cdf(1, b * p.w)) / (p.mu_c - p.mu_t)
    }
}

/// Stationary moments feeding the general AoC expressions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentInputs {
    /// `E[X]`
    pub e_x: f64,
    /// `E[X²]`
    pub e_x2: f64,
    /// `E[X T]`, inter-arrival before a task times that task's delay.
    pub e_xt: f64,
    /// `E[((T − w)⁺)²]`
    pub e_hinge_t: f64,
    /// `E[((T − S_c − w)⁺)²]`
    pub e_hinge_t_sc: f64,
    pub eps_w: f64,
    /// Mean delay of the task closing a hard-deadline cycle.
    pub e_tm: f64,
    pub e_m: f64,
    pub e_m2: f64,
}

impl MomentInputs {
    /// Moments of the M/M/1-M/M/1 tandem with `M` geometric of parameter `1 − ε_w`.
    pub fn mm1(p: &MM1Params) -> Self {
        let l = p.lambda;
        let eps = epsilon_w(p);
        let (a, b) = p.sojourn_rates();
        // 1/(1 − ε_w) through Ξ̂ avoids forming 1 − ε_w.
        let e_m = l / throughput_mm1_approx(p);
        MomentInputs {
            e_x: 1.0 / l,
            e_x2: 2.0 / (l * l),
            e_xt: f64::NAN,
            e_hinge_t: f64::NAN,
            e_hinge_t_sc: f64::NAN,
            eps_w: eps,
            e_tm: conditional_delay_mean(p).unwrap_or(1.0 / a + 1.0 / b),
            e_m,
            e_m2: (1.0 + eps) * e_m * e_m,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.e_x > 0.0) {
            return Err(Error::Domain(format!("E[X] must be > 0, got {}", self.e_x)));
        }
        if self.e_x2 < self.e_x * self.e_x * (1.0 - 1e-9) {
            return Err(Error::Domain(format!(
                "E[X^2] = {} < E[X]^2 = {}",
                self.e_x2,
                self.e_x * self.e_x
            )));
        }
        if !(0.0..=1.0).contains(&self.eps_w) {
            return Err(Error::Domain(format!(
                "eps_w = {} outside [0, 1]",
                self.eps_w
            )));
        }
        Ok(())
    }
}

/// General soft-deadline AoC from stationary moments.
pub fn theta_soft_from_moments(m: &MomentInputs) -> Result<f64> {
    m.check()?;
    let hinge = if m.eps_w == 0.0 {
        0.0
    } else {
        m.eps_w * (m.e_hinge_t - m.e_hinge_t_sc)
    };
    Ok((m.e_xt + 0.5 * m.e_x2) / m.e_x + hinge / (2.0 * m.e_x))
}

/// Hard-deadline AoC from cycle moments.
pub fn theta_hard_from_moments(m: &MomentInputs) -> Result<f64> {
    m.check()?;
    if !(m.e_m >= 1.0) {
        return Err(Error::Domain(format!("E[M] must be >= 1, got {}", m.e_m)));
    }
    if m.e_m2 < m.e_m * m.e_m * (1.0 - 1e-9) {
        return Err(Error::Domain(format!("E[M^2] = {} < E[M]^2", m.e_m2)));
    }
    Ok(m.e_tm + m.e_x2 / (2.0 * m.e_x) + (m.e_m2 / (2.0 * m.e_m) - 0.5) * m.e_x)
}

/// Quantities exposed through the `analytic` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Theta,
    Throughput,
    Epsilon,
    Aoi,
}

impl std::str::FromStr for Quantity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theta" => Ok(Quantity::Theta),
            "throughput" => Ok(Quantity::Throughput),
            "epsilon" => Ok(Quantity::Epsilon),
            "aoi" => Ok(Quantity::Aoi),
            _ => Err(Error::Config(format!("unknown quantity `{s}`"))),
        }
    }
}

/// Evaluates one quantity. Soft throughput is `λ` since every task counts.
pub fn evaluate(p: &MM1Params, deadline: DeadlineKind, q: Quantity) -> f64 {
    match (q, deadline) {
        (Quantity::Theta, DeadlineKind::Soft) => theta_soft_mm1(p),
        (Quantity::Theta, DeadlineKind::Hard) => theta_hard_mm1_approx(p),
        (Quantity::Throughput, DeadlineKind::Soft) => p.lambda,
        (Quantity::Throughput, DeadlineKind::Hard) => throughput_mm1_approx(p),
        (Quantity::Epsilon, _) => epsilon_w(p),
        (Quantity::Aoi, _) => aoi_mm1_tandem(p),
    }
}
