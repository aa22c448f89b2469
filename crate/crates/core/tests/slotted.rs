use aoc_core::slotted::*;
use aoc_core::DeadlineKind;
use proptest::prelude::*;

fn cfg(
    n: usize,
    lambda: f64,
    mu: f64,
    w: f64,
    kind: DeadlineKind,
    horizon: u64,
    policy: Policy,
) -> SlottedConfig {
    SlottedConfig::symmetric(n, lambda, mu, w, kind, horizon, policy, 42)
}

#[test]
fn deterministic_single_source_alternates() {
    let c = cfg(
        1,
        1.0,
        1.0,
        f64::INFINITY,
        DeadlineKind::Soft,
        1000,
        Policy::MaxWeight,
    );
    let res = run_slotted_traced(&c, true).unwrap();
    let tail: Vec<f64> = res.trace.unwrap()[100..].iter().map(|r| r.c).collect();
    assert!(
        tail.windows(2)
            .all(|p| (p[0], p[1]) == (2.0, 3.0) || (p[0], p[1]) == (3.0, 2.0)),
        "{:?}",
        &tail[..6]
    );
    assert!((res.mean - 2.5).abs() < 1e-2);
}

#[test]
fn no_arrivals_is_pure_aging() {
    let mut c = cfg(2, 0.0, 0.7, 5.0, DeadlineKind::Soft, 400, Policy::MaxWeight);
    c.warmup = Some(0);
    let res = run_slotted(&c).unwrap();
    // Empty schedules keep c(k) = k for every source.
    assert_eq!(res.mean, (400.0 + 1.0) / 2.0);
}

#[test]
fn hard_deadline_of_one_slot_never_resets() {
    let c = cfg(1, 1.0, 1.0, 1.0, DeadlineKind::Hard, 200, Policy::Maf);
    let res = run_slotted_traced(&c, true).unwrap();
    let trace = res.trace.unwrap();
    assert!(trace.iter().any(|r| r.d && r.valid == Some(false)));
    assert!(trace.iter().enumerate().all(|(k, r)| r.c == (k + 1) as f64));
}

#[test]
fn hard_exceeds_soft_under_the_same_draws() {
    for policy in [Policy::MaxWeight, Policy::Maf, Policy::Randomized] {
        let soft = run_slotted(&cfg(3, 0.3, 0.6, 3.0, DeadlineKind::Soft, 50_000, policy)).unwrap();
        let hard = run_slotted(&cfg(3, 0.3, 0.6, 3.0, DeadlineKind::Hard, 50_000, policy)).unwrap();
        assert!(
            hard.mean > soft.mean,
            "{policy:?}: {} vs {}",
            hard.mean,
            soft.mean
        );
    }
}

#[test]
fn symmetric_selection_is_uniform() {
    let n = 5;
    let c = cfg(
        n,
        0.4,
        0.8,
        4.0,
        DeadlineKind::Soft,
        u64::MAX,
        Policy::MaxWeight,
    );
    let mut st = SlottedState::new(n);
    let mut rng = SlottedStreams::new(c.seed, 0);
    let mut counts = vec![0u64; n];
    let mut total = 0u64;
    while total < 100_000 {
        let ev = st.step(&c, &mut rng);
        if let Some(Some(i)) = ev.decision {
            counts[i] += 1;
            total += 1;
        }
    }
    let p = 1.0 / n as f64;
    let sd = (total as f64 * p * (1.0 - p)).sqrt();
    for &k in &counts {
        assert!((k as f64 - total as f64 * p).abs() < 3.0 * sd, "{counts:?}");
    }
}

#[test]
fn idle_only_randomized_never_schedules() {
    let mut c = cfg(
        3,
        0.5,
        0.9,
        4.0,
        DeadlineKind::Soft,
        500,
        Policy::Randomized,
    );
    c.q = vec![1.0, 0.0, 0.0, 0.0];
    let res = run_slotted(&c).unwrap();
    assert_eq!(res.decisions, 0);
    assert_eq!(res.departures, 0);
}

#[test]
fn single_source_policies_coincide() {
    let a = run_slotted_traced(
        &cfg(
            1,
            0.3,
            0.6,
            3.0,
            DeadlineKind::Soft,
            20_000,
            Policy::MaxWeight,
        ),
        true,
    )
    .unwrap();
    let b = run_slotted_traced(
        &cfg(1, 0.3, 0.6, 3.0, DeadlineKind::Soft, 20_000, Policy::Maf),
        true,
    )
    .unwrap();
    assert_eq!(a.trace, b.trace);
}

#[test]
fn long_traces_replay_exactly() {
    for kind in [DeadlineKind::Soft, DeadlineKind::Hard] {
        for policy in [Policy::MaxWeight, Policy::Maf, Policy::Randomized] {
            let c = cfg(4, 0.3, 0.7, 3.0, kind, 10_000, policy);
            let rows = run_slotted_traced(&c, true).unwrap().trace.unwrap();
            assert_eq!(
                replay_trace(&rows, 4, kind, 3.0),
                None,
                "{kind:?} {policy:?}"
            );
        }
    }
}

#[test]
fn trace_csv_round_trip() {
    let c = cfg(2, 0.4, 0.5, 2.0, DeadlineKind::Soft, 300, Policy::MaxWeight);
    let rows = run_slotted_traced(&c, true).unwrap().trace.unwrap();
    let mut buf = Vec::new();
    write_trace_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows);
    assert!(read_trace_csv("k,i,c,z,a,d,valid\n1,0,1,1,2,0,\n".as_bytes()).is_err());
}

#[test]
fn reruns_are_identical() {
    let c = cfg(
        3,
        0.3,
        0.6,
        3.0,
        DeadlineKind::Soft,
        5_000,
        Policy::Randomized,
    );
    assert_eq!(
        run_slotted(&c).unwrap().per_source,
        run_slotted(&c).unwrap().per_source
    );
    let (a, _) = run_replications(&c, 4).unwrap();
    let (b, _) = run_replications(&c, 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_validation() {
    let good = cfg(2, 0.3, 0.6, 3.0, DeadlineKind::Soft, 100, Policy::Maf);
    assert!(good.validate().is_ok());
    let mut c = good.clone();
    c.q = vec![0.5, 0.5, 0.5];
    assert!(c.validate().is_err());
    let mut c = good.clone();
    c.lambda[0] = 1.5;
    assert!(c.validate().is_err());
    let mut c = good.clone();
    c.warmup = Some(100);
    assert!(c.validate().is_err());
    let mut c = good;
    c.beta.pop();
    assert!(c.validate().is_err());
}

fn view() -> impl Strategy<Value = DecisionView> {
    (1usize..6).prop_flat_map(|n| {
        prop::collection::vec((1u32..60, 0u32..60, 0.0f64..1.0), n).prop_map(|xs| {
            let c: Vec<f64> = xs.iter().map(|x| x.0 as f64 + 1.0).collect();
            DecisionView {
                c_prev: c.iter().map(|c| c - 1.0).collect(),
                z: xs
                    .iter()
                    .zip(&c)
                    .map(|(x, c)| (x.1 as f64).min(*c))
                    .collect(),
                eps: xs.iter().map(|x| x.2).collect(),
                c,
            }
        })
    })
}

fn probe_cfg(n: usize, kind: DeadlineKind, mu: &[f64], beta: &[f64], w: f64) -> SlottedConfig {
    let mut c = SlottedConfig::symmetric(n, 0.5, 0.5, w, kind, 10, Policy::MaxWeight, 0);
    c.mu_t = mu[..n].to_vec();
    c.beta = beta[..n].to_vec();
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn maxweight_minimizes_drift(
        v in view(),
        mu in prop::collection::vec(0.05f64..1.0, 6),
        beta in prop::collection::vec(0.1f64..4.0, 6),
        w in 0.0f64..20.0,
        hard in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let kind = if hard { DeadlineKind::Hard } else { DeadlineKind::Soft };
        let c = probe_cfg(v.sources(), kind, &mu, &beta, w);
        let probe = drift_probe(&v, &c);
        let mut rng = aoc_core::dist::make_stream(seed, 0);
        let pick = choose_action(Policy::MaxWeight, &v, &c, &mut rng).unwrap();
        prop_assert!(probe.minimizers.contains(&pick), "{pick} not in {:?}", probe.minimizers);
    }

    #[test]
    fn equal_weights_make_every_action_a_minimizer(n in 1usize..6, c0 in 2u32..40, z0 in 0u32..40, w in 0.0f64..50.0) {
        let c = c0 as f64;
        let v = DecisionView { c_prev: vec![c - 1.0; n], c: vec![c; n], z: vec![(z0 as f64).min(c); n], eps: vec![0.3; n] };
        let probe = drift_probe(&v, &probe_cfg(n, DeadlineKind::Soft, &[0.6; 6], &[1.0; 6], w));
        prop_assert_eq!(probe.minimizers, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn drift_minimizers_ignore_weight_scale(v in view(), s in 0.1f64..10.0, w in 0.0f64..20.0) {
        let n = v.sources();
        let beta = [0.5, 1.0, 2.0, 0.7, 1.3, 3.0];
        let scaled: Vec<f64> = beta.iter().map(|b| b * s).collect();
        let a = drift_probe(&v, &probe_cfg(n, DeadlineKind::Soft, &[0.6; 6], &beta, w));
        let b = drift_probe(&v, &probe_cfg(n, DeadlineKind::Soft, &[0.6; 6], &scaled, w));
        prop_assert_eq!(a.minimizers, b.minimizers);
    }

    #[test]
    fn simulated_choices_minimize_drift(seed in 0u64..1000, hard in any::<bool>()) {
        let kind = if hard { DeadlineKind::Hard } else { DeadlineKind::Soft };
        let mut c = SlottedConfig::symmetric(3, 0.4, 0.6, 3.0, kind, 2000, Policy::MaxWeight, seed);
        c.mu_t = vec![0.3, 0.6, 0.9];
        c.beta = vec![2.0, 1.0, 0.5];
        let mut st = SlottedState::new(3);
        let mut rng = SlottedStreams::new(seed, 0);
        let mut bad = None;
        for _ in 0..500 {
            st.step_with(&c, &mut rng, |v, a| {
                let probe = drift_probe(v, &c);
                if !probe.minimizers.contains(&a.unwrap()) {
                    bad = Some((v.clone(), a));
                }
            });
        }
        prop_assert!(bad.is_none(), "{bad:?}");
    }
}
