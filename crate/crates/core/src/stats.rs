//! Replication summaries.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and two-sided 95% Student-t interval of independent replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub n: usize,
}

impl Summary {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci95_hi - self.ci95_lo)
    }
}

/// Sample mean and unbiased standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Two-sided Student-t quantile for confidence `level` and `n` samples.
pub fn t_quantile(level: f64, n: usize) -> f64 {
    let dof = (n.max(2) - 1) as f64;
    StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + 0.5 * level)
}

pub fn summarize(xs: &[f64]) -> Summary {
    let (mean, sd) = mean_sd(xs);
    let n = xs.len();
    if n < 2 {
        return Summary {
            mean,
            ci95_lo: mean,
            ci95_hi: mean,
            n,
        };
    }
    let hw = t_quantile(0.95, n) * sd / (n as f64).sqrt();
    Summary {
        mean,
        ci95_lo: mean - hw,
        ci95_hi: mean + hw,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_quantile_matches_table() {
        // t_{0.975, 4} = 2.776, t_{0.975, 29} = 2.045
        assert!((t_quantile(0.95, 5) - 2.7764).abs() < 1e-3);
        assert!((t_quantile(0.95, 30) - 2.0452).abs() < 1e-3);
    }

    #[test]
    fn constant_sample_has_zero_width() {
        let s = summarize(&[3.0, 3.0, 3.0]);
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.half_width(), 0.0);
    }
}
