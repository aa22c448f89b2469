use aoc_core::dist::{density_grid, make_stream, sample, DistributionSpec};
use rand::{Rng, RngCore};

fn draws(spec: &DistributionSpec, seed: u64, id: u64, n: usize) -> Vec<f64> {
    let mut s = make_stream(seed, id);
    (0..n).map(|_| sample(spec, &mut s).unwrap()).collect()
}

#[test]
fn same_arguments_same_sequence() {
    let mut a = make_stream(42, 0);
    let mut b = make_stream(42, 0);
    for _ in 0..1000 {
        assert_eq!(a.next_u64(), b.next_u64());
    }
}

#[test]
fn seed_changes_first_variate() {
    let spec = DistributionSpec::exp(1.0);
    assert_ne!(draws(&spec, 42, 0, 1)[0], draws(&spec, 43, 0, 1)[0]);
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[test]
fn neighbouring_streams_pass_ks() {
    let spec = DistributionSpec::exp(1.0);
    let n = 100_000;
    let d = ks_statistic(draws(&spec, 42, 0, n), draws(&spec, 42, 1, n));
    // c(0.01) = 1.628 for the two-sample test.
    let critical = 1.628 * (2.0 / n as f64).sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn exponential_mean_law_of_large_numbers() {
    let xs = draws(&DistributionSpec::exp(3.0), 7, 0, 1_000_000);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    assert!((mean - 1.0 / 3.0).abs() < 0.002, "{mean}");
}

#[test]
fn deterministic_is_constant() {
    assert!(draws(&DistributionSpec::det(2.0), 1, 0, 100)
        .iter()
        .all(|&x| x == 2.0));
}

#[test]
fn single_branch_hyperexponential_matches_exponential() {
    let h = DistributionSpec::Hyperexponential {
        weights: vec![1.0],
        rates: vec![2.0],
    };
    let n = 100_000;
    let d = ks_statistic(
        draws(&h, 5, 0, n),
        draws(&DistributionSpec::exp(2.0), 6, 0, n),
    );
    assert!(d < 1.628 * (2.0 / n as f64).sqrt(), "D = {d}");
}

#[test]
fn moments_within_five_standard_errors() {
    let specs = [
        DistributionSpec::exp(3.0),
        DistributionSpec::gamma(2.0, 4.0),
        DistributionSpec::Uniform { lo: 0.5, hi: 2.0 },
        DistributionSpec::Hyperexponential {
            weights: vec![0.3, 0.7],
            rates: vec![0.5, 4.0],
        },
    ];
    for (id, spec) in specs.iter().enumerate() {
        let xs = draws(spec, 11, id as u64, 1_000_000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let se_mean = (m2 / n).sqrt();
        let se_var = ((m4 - m2 * m2) / n).sqrt();
        assert!(
            (mean - spec.mean()).abs() < 5.0 * se_mean,
            "{}: mean {mean} vs {}",
            spec.name(),
            spec.mean()
        );
        assert!(
            (m2 - spec.variance()).abs() < 5.0 * se_var,
            "{}: var {m2} vs {}",
            spec.name(),
            spec.variance()
        );
    }
}

#[test]
fn exponential_grid_mass() {
    let g = density_grid(&DistributionSpec::exp(1.0), 0.0, 20.0, 2001).unwrap();
    let h = g.h();
    // Trapezoid of e^{-x}: (h/2)·coth(h/2)·(1 − e^{−20}).
    let exact_trapz = 0.5 * h / (0.5 * h).tanh() * (1.0 - (-20.0f64).exp());
    assert!((g.total_mass - exact_trapz).abs() < 1e-12);
    // The rule itself sits h²/12 above the CDF.
    assert!((g.total_mass - (1.0 - (-20.0f64).exp())).abs() < h * h / 12.0 * 1.001);
}

#[test]
fn deterministic_has_no_density() {
    assert!(density_grid(&DistributionSpec::det(1.0), 0.0, 2.0, 11).is_err());
}

#[test]
fn uniform_grid_is_flat() {
    let g = density_grid(
        &DistributionSpec::Uniform { lo: 0.0, hi: 1.0 },
        0.0,
        1.0,
        101,
    )
    .unwrap();
    assert!(g.values[1..100].iter().all(|&v| v == 1.0));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = make_stream(0, 0);
    assert!(sample(&DistributionSpec::exp(-1.0), &mut s).is_err());
    assert!(sample(&DistributionSpec::gamma(0.0, 1.0), &mut s).is_err());
    let bad = DistributionSpec::Hyperexponential {
        weights: vec![0.5],
        rates: vec![1.0],
    };
    assert!(sample(&bad, &mut s).is_err());
}

#[test]
fn streams_are_send() {
    let mut s = make_stream(3, 9);
    let x: f64 = std::thread::spawn(move || s.random()).join().unwrap();
    assert!((0.0..1.0).contains(&x));
}
