use aoc_core::closed_form::{
    aoi_mm1_tandem, theta_hard_mm1_approx, theta_soft_mm1, throughput_mm1_approx, MM1Params,
};
use aoc_core::dist::{density_grid, DistributionSpec};
use aoc_core::gg::*;
use aoc_core::grid::{cumtrapz, DensityGrid};
use aoc_core::tandem::{run_tandem, Lindley, TandemConfig};
use aoc_core::DeadlineKind;

fn mm1(l: f64, mt: f64, mc: f64, w: f64, n: usize) -> GGAnalytic {
    GGAnalytic::new(GGInputs::mm1(&MM1Params::new(l, mt, mc, w).unwrap(), n).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn delay_density_is_the_exponential_convolution() {
    // Sojourn rates 1 and 2.
    let g = mm1(1.0, 2.0, 3.0, 0.5, DEFAULT_N);
    let expect = 2.0 * ((-1.0f64).exp() - (-2.0f64).exp());
    assert!(
        (g.eta1(1.0).value - expect).abs() < 1e-3,
        "{}",
        g.eta1(1.0).value
    );
    // The origin node keeps half a cell of the corner value, which vanishes with h.
    let fine = mm1(1.0, 2.0, 3.0, 0.5, 2 * DEFAULT_N - 1);
    assert!(g.eta1(0.0).value <= 0.5 * g.eta_step() * 2.0 * 1.001);
    assert!(fine.eta1(0.0).value < 0.51 * g.eta1(0.0).value);
    assert!(g.eta1(-1.0).truncated && g.eta1(1e6).truncated);
    assert!(g.eta1_nodes().iter().all(|&v| v >= 0.0));
    let mass = *cumtrapz(g.eta1_nodes(), g.eta_step()).last().unwrap();
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
}

#[test]
fn wait_density_matches_closed_form() {
    let (l, mt, mc) = (1.0, 2.0, 3.0);
    let g = mm1(l, mt, mc, 0.5, DEFAULT_N);
    let (a, b, rho) = (mt - l, mc - l, l / mc);
    for tau in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let exact = (1.0 - rho) * a * (-a * tau).exp()
            + rho * a * b / (b - a) * ((-a * tau).exp() - (-b * tau).exp());
        assert!(
            (g.eta2(tau).value - exact).abs() < 1e-3,
            "tau {tau}: {} vs {exact}",
            g.eta2(tau).value
        );
    }
    let mass = *cumtrapz(g.eta2_nodes(), g.eta_step()).last().unwrap();
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
}

#[test]
fn wait_cdf_dominates_delay_cdf() {
    let g = mm1(1.0, 2.0, 3.0, 0.5, DEFAULT_N);
    let c1 = cumtrapz(g.eta1_nodes(), g.eta_step());
    let c2 = cumtrapz(g.eta2_nodes(), g.eta_step());
    assert!(c1.iter().zip(&c2).all(|(x, y)| *y >= *x - 1e-9));
}

/// `E[X W_t]` and `E[X W_c]` by direct simulation.
fn simulated_cross_moments(tasks: usize) -> (f64, f64) {
    let cfg = TandemConfig::mm1(1.0, 2.0, 3.0, f64::INFINITY, DeadlineKind::Soft, tasks, 31);
    let (mut s1, mut s2) = (0.0, 0.0);
    for r in Lindley::new(&cfg).unwrap().take(tasks).skip(tasks / 10) {
        s1 += r.x * (r.d1 - r.st - r.tau);
        s2 += r.x * r.w_c();
    }
    let n = (tasks - tasks / 10) as f64;
    (s1 / n, s2 / n)
}

#[test]
fn cross_moments_match_simulation() {
    let g = mm1(1.0, 2.0, 3.0, 0.5, DEFAULT_N);
    // E[X (U − X)⁺] = λ / (a (λ + a)²) = 1/4.
    assert!((g.g1() - 0.25).abs() < 1e-3, "{}", g.g1());
    let (mc1, mc2) = simulated_cross_moments(10_000_000);
    assert!((g.g1() - mc1).abs() < 1e-3, "g1 {} vs {mc1}", g.g1());
    assert!((g.g2() - mc2).abs() < 2e-3, "g2 {} vs {mc2}", g.g2());
}

#[test]
fn cross_moment_grid_convergence() {
    let p = MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap();
    let coarse = g1_quadrature(&GGInputs::mm1(&p, 801).unwrap()).unwrap();
    let fine = g1_quadrature(&GGInputs::mm1(&p, 1601).unwrap()).unwrap();
    let finer = g1_quadrature(&GGInputs::mm1(&p, 3201).unwrap()).unwrap();
    assert!(rel(coarse, fine) < 1e-3, "{coarse} vs {fine}");
    // Second order: each halving cuts the change by about four.
    let ratio = (coarse - fine) / (fine - finer);
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
    let coarse = g2_quadrature(&GGInputs::mm1(&p, 2001).unwrap()).unwrap();
    let fine = g2_quadrature(&GGInputs::mm1(&p, 4001).unwrap()).unwrap();
    assert!(rel(coarse, fine) < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn exponential_inputs_reduce_to_closed_forms() {
    let g = mm1(1.0, 2.0, 3.0, 0.5, DEFAULT_N);
    let p = MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap();
    assert!(rel(g.theta_soft(), theta_soft_mm1(&p)) < 1e-2);
    assert!((g.ft_cdf(0.5) - 0.1548).abs() < 1e-3);

    let g = mm1(0.1, 2.0, 3.0, 0.5, DEFAULT_N);
    let p = MM1Params::new(0.1, 2.0, 3.0, 0.5).unwrap();
    assert!((g.theta_hard() - 31.15).abs() < 0.1, "{}", g.theta_hard());
    assert!(rel(g.theta_hard(), theta_hard_mm1_approx(&p)) < 1e-2);
    assert!((g.throughput() - 0.03241).abs() < 1e-4);
    assert!(rel(g.throughput(), throughput_mm1_approx(&p)) < 1e-2);
}

#[test]
fn deadline_edges() {
    let g = mm1(1.0, 2.0, 3.0, 0.0, DEFAULT_N);
    assert_eq!(g.ft_cdf(0.0), 0.0);
    assert_eq!(g.throughput(), 0.0);
    assert!(g.theta_hard().is_infinite());
    let mut last = 0.0;
    for i in 0..200 {
        let f = g.ft_cdf(i as f64 * 0.05);
        assert!(f >= last);
        last = f;
    }

    let far = mm1(1.0, 2.0, 3.0, 1e9, DEFAULT_N);
    let p = MM1Params::new(1.0, 2.0, 3.0, 1e9).unwrap();
    assert!(rel(far.theta_soft(), aoi_mm1_tandem(&p)) < 1e-3);
    assert!(rel(far.throughput(), 1.0) < 1e-3);
    assert!(rel(far.theta_hard(), 1.0 + 0.5 + 1.0) < 1e-3);
}

#[test]
fn deterministic_arrivals_halve_the_gap() {
    let p = MM1Params::new(1.0, 2.0, 3.0, 1e9).unwrap();
    let mut inputs = GGInputs::mm1(&p, 1001).unwrap();
    inputs.f_x = DensityGrid::point_mass(1.0, 0.0, 2.0, 1001).unwrap();
    let g = GGAnalytic::new(inputs).unwrap();
    assert!((g.mean_x() - 1.0).abs() < 1e-12);
    // E[T | T ≤ ∞] + E[X²]/(2E[X]) with X ≡ 1.
    assert!(
        rel(g.theta_hard(), 1.0 + 0.5 + 0.5) < 1e-3,
        "{}",
        g.theta_hard()
    );
}

fn uniform(lo: f64, hi: f64, top: f64, n: usize) -> DensityGrid {
    density_grid(&DistributionSpec::Uniform { lo, hi }, 0.0, top, n).unwrap()
}

#[test]
fn no_waiting_when_sojourn_ends_before_next_arrival() {
    let n = 401;
    let raw = DensityGrid::from_fn_2d(
        0.0,
        4.0,
        n,
        |u, v| if u <= 1.0 && v <= 1.0 { 1.0 } else { 0.0 },
    )
    .unwrap();
    let values = raw.values.iter().map(|v| v / raw.total_mass).collect();
    let joint = DensityGrid::two_d(0.0, 4.0, n, values).unwrap();
    let inputs = GGInputs {
        f_x: uniform(5.0, 6.0, 6.0, n),
        f_st: uniform(0.0, 1.0, 1.0, n),
        f_sc: uniform(0.0, 1.0, 1.0, n),
        f_ut_uc: joint.clone(),
        f_ut_wc: joint,
        w: 1.0,
        lambda: 1.0 / 5.5,
        mu_t: 2.0,
        mu_c: 2.0,
        tail_budget: DEFAULT_TAIL_BUDGET,
    };
    let g = GGAnalytic::new(inputs).unwrap();
    assert_eq!(g.g1(), 0.0);
}

#[test]
fn compute_wait_vanishes_with_instant_compute_queue() {
    let p = MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap();
    let mut inputs = GGInputs::mm1(&p, 1001).unwrap();
    let (hi, n) = (inputs.f_ut_uc.hi, inputs.f_ut_uc.n);
    let h = hi / (n - 1) as f64;
    let spike = DensityGrid::from_fn_2d(0.0, hi, n, |u, v| {
        if v == 0.0 {
            (-u).exp() * 2.0 / h
        } else {
            0.0
        }
    })
    .unwrap();
    inputs.f_ut_uc = spike.clone();
    inputs.f_ut_wc = spike;
    let g = GGAnalytic::new(inputs).unwrap();
    assert!(g.g2().abs() < 1e-3, "{}", g.g2());
}

#[test]
fn validation_catches_bad_inputs() {
    let p = MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap();
    let good = GGInputs::mm1(&p, 401).unwrap();

    let mut wrong_rate = good.clone();
    wrong_rate.mu_t = 2.5;
    assert!(GGAnalytic::new(wrong_rate).is_err());

    let mut flat = good.clone();
    flat.f_ut_uc = good.f_x.clone();
    assert!(GGAnalytic::new(flat).is_err());

    // Half the arrival mass cut off is beyond the hard limit.
    let mut truncated = good.clone();
    truncated.f_x = density_grid(&DistributionSpec::exp(1.0), 0.0, 0.7, 401).unwrap();
    assert!(GGAnalytic::new(truncated).is_err());

    // A 1% cut is only a warning.
    let mut mild = good.clone();
    mild.f_sc = density_grid(&DistributionSpec::exp(3.0), 0.0, 4.6 / 3.0, 401).unwrap();
    mild.mu_c = 1.0 / mild.f_sc.mean();
    let g = GGAnalytic::new(mild).unwrap();
    assert!(
        g.warnings.iter().any(|w| w.contains("f_Sc")),
        "{:?}",
        g.warnings
    );
}

#[test]
fn gamma_services_match_simulation() {
    let arrival = DistributionSpec::exp(1.0);
    let transmit = DistributionSpec::gamma(2.0, 4.0);
    let compute = DistributionSpec::gamma(2.0, 6.0);
    let w = 0.5;
    let mut calib = TandemConfig::new(
        arrival.clone(),
        transmit.clone(),
        compute.clone(),
        w,
        DeadlineKind::Soft,
        2_000_000,
        101,
    );
    calib.keep_tasks = true;
    calib.warmup = Some(0);
    let recs = run_tandem(&calib).unwrap().per_task.unwrap();
    let inputs =
        GGInputs::from_records(&recs[200_000..], &arrival, &transmit, &compute, w, 1001).unwrap();
    let quad = GGAnalytic::new(inputs).unwrap().theta_soft();

    let reference = TandemConfig::new(
        arrival,
        transmit,
        compute,
        w,
        DeadlineKind::Soft,
        10_000_000,
        202,
    );
    let sim = run_tandem(&reference).unwrap().theta;
    assert!(
        rel(quad, sim) < 0.02,
        "quadrature {quad} vs simulation {sim}"
    );
}
