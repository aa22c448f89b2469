//! Uniform density grids and trapezoidal quadrature.
//!
//! A point mass at the lower edge is stored as a spike of height `2 * mass / h`
//! on node 0, which the endpoint half-weight turns back into `mass`. Histograms
//! built by [`DensityGrid::histogram_2d`] produce that encoding on their own.

use std::io::{BufRead, Write};

use crate::error::{config, Error, Result};

/// Trapezoid rule over equally spaced samples.
pub fn trapz(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoid weight of node `i` out of `n`, in units of `h`.
#[inline]
pub fn trap_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Running trapezoid integral from node 0; `out[i] = ∫_{x_0}^{x_i}`.
pub fn cumtrapz(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * h * (values[i - 1] + v);
        }
        out.push(acc);
    }
    out
}

/// Tail integral; `out[i] = ∫_{x_i}^{x_{n-1}}`.
pub fn tail_trapz(values: &[f64], h: f64) -> Vec<f64> {
    let c = cumtrapz(values, h);
    let total = *c.last().unwrap_or(&0.0);
    c.into_iter().map(|v| total - v).collect()
}

/// Linear interpolation of node values; zero outside `[lo, hi]`.
pub fn interp(values: &[f64], lo: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    if n == 0 || x < lo {
        return 0.0;
    }
    let s = (x - lo) / h;
    let i = s.floor() as usize;
    if i + 1 >= n {
        return if i + 1 == n && (s - i as f64) < 1e-9 {
            values[n - 1]
        } else {
            0.0
        };
    }
    let f = s - i as f64;
    values[i] * (1.0 - f) + values[i + 1] * f
}

/// A density tabulated on a uniform grid, univariate or bivariate.
///
/// Bivariate grids share one axis geometry for both variables and store
/// `values[i * n + j]` for the pair `(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub values: Vec<f64>,
    pub total_mass: f64,
    two_d: bool,
}

fn check_geometry(lo: f64, hi: f64, n: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) || n < 2 {
        return config(format!(
            "grid needs 0 <= lo < hi and n >= 2, got [{lo}, {hi}], n = {n}"
        ));
    }
    Ok(())
}

fn check_values(values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Numeric(format!(
                "grid value {v} at index {i} is not a finite nonnegative number"
            )));
        }
    }
    Ok(())
}

impl DensityGrid {
    pub fn one_d(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        check_geometry(lo, hi, n)?;
        check_values(&values)?;
        let h = (hi - lo) / (n - 1) as f64;
        let total_mass = trapz(&values, h);
        Ok(DensityGrid {
            lo,
            hi,
            n,
            values,
            total_mass,
            two_d: false,
        })
    }

    pub fn two_d(lo: f64, hi: f64, n: usize, values: Vec<f64>) -> Result<Self> {
        check_geometry(lo, hi, n)?;
        if values.len() != n * n {
            return config(format!(
                "bivariate grid needs {} values, got {}",
                n * n,
                values.len()
            ));
        }
        check_values(&values)?;
        let mut g = DensityGrid {
            lo,
            hi,
            n,
            values,
            total_mass: 0.0,
            two_d: true,
        };
        g.total_mass = g
            .row_marginal_values()
            .iter()
            .enumerate()
            .map(|(i, v)| trap_weight(i, n) * v)
            .sum::<f64>()
            * g.h();
        Ok(g)
    }

    /// Builds a bivariate grid from a function of `(x_i, x_j)`.
    pub fn from_fn_2d(lo: f64, hi: f64, n: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        check_geometry(lo, hi, n)?;
        let h = (hi - lo) / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(lo + i as f64 * h, lo + j as f64 * h));
            }
        }
        Self::two_d(lo, hi, n, values)
    }

    /// A unit atom at the node nearest `x0`, encoded so trapezoid weights give mass 1.
    pub fn point_mass(x0: f64, lo: f64, hi: f64, n: usize) -> Result<Self> {
        check_geometry(lo, hi, n)?;
        if x0 < lo || x0 > hi {
            return config(format!("atom {x0} outside [{lo}, {hi}]"));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let i = ((x0 - lo) / h).round() as usize;
        let mut values = vec![0.0; n];
        values[i] = 1.0 / (h * trap_weight(i, n));
        Self::one_d(lo, hi, values)
    }

    /// Bivariate histogram of `(u, v)` pairs snapped to the nearest node.
    ///
    /// Samples beyond `hi` are dropped and show up as missing mass.
    pub fn histogram_2d(pairs: &[(f64, f64)], hi: f64, n: usize) -> Result<Self> {
        check_geometry(0.0, hi, n)?;
        if pairs.is_empty() {
            return config("histogram needs at least one sample");
        }
        let h = hi / (n - 1) as f64;
        let mut counts = vec![0.0; n * n];
        for &(u, v) in pairs {
            let i = (u / h).round();
            let j = (v / h).round();
            if u < 0.0 || v < 0.0 || i >= n as f64 || j >= n as f64 {
                continue;
            }
            counts[i as usize * n + j as usize] += 1.0;
        }
        let total = pairs.len() as f64;
        for i in 0..n {
            for j in 0..n {
                let cell = h * h * trap_weight(i, n) * trap_weight(j, n);
                counts[i * n + j] /= total * cell;
            }
        }
        Self::two_d(0.0, hi, n, counts)
    }

    pub fn is_2d(&self) -> bool {
        self.two_d
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Interpolated density of a univariate grid.
    pub fn eval(&self, x: f64) -> f64 {
        interp(&self.values, self.lo, self.h(), x)
    }

    /// `∫ x^k f(x) dx` for a univariate grid.
    pub fn moment(&self, k: i32) -> f64 {
        let xs: Vec<f64> = (0..self.n)
            .map(|i| self.x(i).powi(k) * self.values[i])
            .collect();
        trapz(&xs, self.h())
    }

    /// Mean of a univariate grid, normalized by its tabulated mass.
    pub fn mean(&self) -> f64 {
        self.moment(1) / self.total_mass
    }

    /// Density of the first variable: `f(u) = ∫ f(u, v) dv`.
    pub fn row_marginal_values(&self) -> Vec<f64> {
        let n = self.n;
        let h = self.h();
        (0..n)
            .map(|i| {
                h * (0..n)
                    .map(|j| trap_weight(j, n) * self.at(i, j))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Density of the second variable: `f(v) = ∫ f(u, v) du`.
    pub fn col_marginal_values(&self) -> Vec<f64> {
        let n = self.n;
        let h = self.h();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let w = h * trap_weight(i, n);
            for (j, o) in out.iter_mut().enumerate() {
                *o += w * self.at(i, j);
            }
        }
        out
    }

    pub fn row_marginal(&self) -> Result<DensityGrid> {
        DensityGrid::one_d(self.lo, self.hi, self.row_marginal_values())
    }

    pub fn col_marginal(&self) -> Result<DensityGrid> {
        DensityGrid::one_d(self.lo, self.hi, self.col_marginal_values())
    }

    /// Checks the tabulated mass against a tail budget.
    ///
    /// Returns a warning when the missing mass exceeds `budget`, and an error
    /// when it exceeds `hard_limit` or the mass overshoots 1 by more than 1e-3.
    pub fn check_mass(&self, label: &str, budget: f64, hard_limit: f64) -> Result<Option<String>> {
        let deficit = 1.0 - self.total_mass;
        if self.total_mass > 1.0 + 1e-3 {
            return Err(Error::Numeric(format!(
                "{label}: mass {} exceeds 1",
                self.total_mass
            )));
        }
        if deficit > hard_limit {
            return Err(Error::Numeric(format!(
                "{label}: tabulated mass {} leaves {deficit:.3e} in the tail (limit {hard_limit})",
                self.total_mass
            )));
        }
        if deficit > budget {
            return Ok(Some(format!(
                "{label}: truncated tail mass {deficit:.3e} exceeds budget {budget:.1e}"
            )));
        }
        Ok(None)
    }

    /// Writes `lo,hi,n`, the parameter line, then one value row (1-D) or `n` rows (2-D).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "lo,hi,n")?;
        writeln!(out, "{},{},{}", self.lo, self.hi, self.n)?;
        let rows = if self.two_d { self.n } else { 1 };
        for r in 0..rows {
            let row = &self.values[r * self.n..(r + 1) * self.n];
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .map_err(Error::from)
        };
        let header = next("header")?;
        if header.trim() != "lo,hi,n" {
            return Err(Error::Parse(format!(
                "line 1: expected header `lo,hi,n`, got `{header}`"
            )));
        }
        let params = next("parameter line")?;
        let p: Vec<&str> = params.trim().split(',').collect();
        if p.len() != 3 {
            return Err(Error::Parse(format!(
                "line 2: expected lo,hi,n, got `{params}`"
            )));
        }
        let num = |s: &str, line: usize| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {line}: `{s}`: {e}")))
        };
        let lo = num(p[0], 2)?;
        let hi = num(p[1], 2)?;
        let n: usize = p[2]
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line 2: n: {e}")))?;
        let mut values = Vec::new();
        let mut rows = 0;
        let mut line_no = 2;
        while let Ok(line) = next("row") {
            line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .trim()
                .split(',')
                .map(|s| num(s, line_no))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n {
                return Err(Error::Parse(format!(
                    "line {line_no}: expected {n} values, got {}",
                    row.len()
                )));
            }
            values.extend(row);
            rows += 1;
        }
        match rows {
            1 => Self::one_d(lo, hi, values),
            r if r == n => Self::two_d(lo, hi, n, values),
            r => Err(Error::Parse(format!(
                "expected 1 or {n} value rows, got {r}"
            ))),
        }
    }
}
