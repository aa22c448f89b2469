use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use aoc_core::closed_form::{
    aoi_mm1_tandem, epsilon_w, theta_soft_from_moments, theta_soft_mm1, MM1Params,
};
use aoc_core::dist::DistributionSpec;
use aoc_core::tandem::{
    replication_streams, run_tandem, soft_area_increment, write_tasks_csv, AoCAccumulator, Lindley,
    Physical, TandemConfig, TaskRecord,
};
use aoc_core::DeadlineKind;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Arrival,
    TxDone,
    CompDone,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: Kind,
    k: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on time, then task index.
        other.time.total_cmp(&self.time).then(other.k.cmp(&self.k))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event-list FCFS tandem over pre-drawn variates.
fn event_driven(cfg: &TandemConfig) -> Vec<TaskRecord> {
    let [mut ra, mut rt, mut rc] = replication_streams(cfg.seed, cfg.replication);
    let (sa, st, sc) = (
        cfg.arrival.sampler().unwrap(),
        cfg.transmit.sampler().unwrap(),
        cfg.compute.sampler().unwrap(),
    );
    let k_max = cfg.tasks;
    let x: Vec<f64> = (0..k_max).map(|_| sa.sample(&mut ra)).collect();
    let s_t: Vec<f64> = (0..k_max).map(|_| st.sample(&mut rt)).collect();
    let s_c: Vec<f64> = (0..k_max).map(|_| sc.sample(&mut rc)).collect();

    let mut recs: Vec<TaskRecord> = (0..k_max)
        .map(|k| TaskRecord {
            k,
            tau: 0.0,
            d1: 0.0,
            tau2: 0.0,
            tau1: 0.0,
            x: x[k],
            st: s_t[k],
            sc: s_c[k],
            t: 0.0,
            valid: false,
        })
        .collect();
    let mut heap = BinaryHeap::new();
    let mut clock = 0.0;
    for k in 0..k_max {
        clock += x[k];
        recs[k].tau = clock;
        heap.push(Event {
            time: clock,
            kind: Kind::Arrival,
            k,
        });
    }
    let (mut tx_q, mut comp_q) = (VecDeque::new(), VecDeque::new());
    let (mut tx_busy, mut comp_busy) = (false, false);
    while let Some(ev) = heap.pop() {
        match ev.kind {
            Kind::Arrival => {
                if tx_busy {
                    tx_q.push_back(ev.k);
                } else {
                    tx_busy = true;
                    recs[ev.k].d1 = ev.time + s_t[ev.k];
                    heap.push(Event {
                        time: recs[ev.k].d1,
                        kind: Kind::TxDone,
                        k: ev.k,
                    });
                }
            }
            Kind::TxDone => {
                if comp_busy {
                    comp_q.push_back(ev.k);
                } else {
                    comp_busy = true;
                    recs[ev.k].tau2 = ev.time;
                    recs[ev.k].tau1 = ev.time + s_c[ev.k];
                    heap.push(Event {
                        time: recs[ev.k].tau1,
                        kind: Kind::CompDone,
                        k: ev.k,
                    });
                }
                match tx_q.pop_front() {
                    Some(j) => {
                        recs[j].d1 = ev.time + s_t[j];
                        heap.push(Event {
                            time: recs[j].d1,
                            kind: Kind::TxDone,
                            k: j,
                        });
                    }
                    None => tx_busy = false,
                }
            }
            Kind::CompDone => match comp_q.pop_front() {
                Some(j) => {
                    recs[j].tau2 = ev.time;
                    recs[j].tau1 = ev.time + s_c[j];
                    heap.push(Event {
                        time: recs[j].tau1,
                        kind: Kind::CompDone,
                        k: j,
                    });
                }
                None => comp_busy = false,
            },
        }
    }
    for r in &mut recs {
        r.t = r.tau1 - r.tau;
        r.valid = cfg.deadline == DeadlineKind::Soft || r.t <= cfg.w;
    }
    recs
}

#[test]
fn lindley_matches_event_list() {
    for (kind, arrival) in [
        (DeadlineKind::Hard, DistributionSpec::exp(1.0)),
        (DeadlineKind::Soft, DistributionSpec::gamma(2.0, 1.6)),
    ] {
        let mut cfg = TandemConfig::new(
            arrival,
            DistributionSpec::exp(2.0),
            DistributionSpec::gamma(2.0, 6.0),
            0.8,
            kind,
            10_000,
            17,
        );
        cfg.replication = 3;
        let lindley: Vec<TaskRecord> = Lindley::new(&cfg).unwrap().take(cfg.tasks).collect();
        assert_eq!(lindley, event_driven(&cfg));
    }
}

/// Integrates `c(t)` on a fine time grid straight from its definition.
fn stepped_area(recs: &[TaskRecord], kind: DeadlineKind, w: f64, steps: usize) -> f64 {
    let end = recs.last().unwrap().tau1;
    let dt = end / steps as f64;
    let (mut next, mut tau_n, mut a, mut g) = (0usize, 0.0, 0u64, 0u64);
    let mut area = 0.0;
    for s in 0..steps {
        let t = (s as f64 + 0.5) * dt;
        while next < recs.len() && recs[next].tau1 <= t {
            let r = &recs[next];
            g += 1;
            if r.t > w {
                a += 1;
            }
            if r.valid {
                tau_n = r.tau;
            }
            next += 1;
        }
        let mut c = t - tau_n;
        if kind == DeadlineKind::Soft && next < recs.len() && recs[next].tau2 <= t && g > 0 {
            let eps = a as f64 / g as f64;
            c += eps * (t - recs[next].tau - w).max(0.0);
        }
        area += c * dt;
    }
    area
}

fn accumulate(recs: &[TaskRecord], kind: DeadlineKind, w: f64) -> AoCAccumulator {
    let mut acc = AoCAccumulator::new(kind, w, 0);
    for r in recs {
        acc.push(r);
    }
    acc
}

#[test]
fn exact_area_matches_time_stepping() {
    for kind in [DeadlineKind::Soft, DeadlineKind::Hard] {
        let cfg = TandemConfig::mm1(1.0, 1.6, 2.2, 1.2, kind, 400, 5);
        let recs: Vec<TaskRecord> = Lindley::new(&cfg).unwrap().take(cfg.tasks).collect();
        let exact = accumulate(&recs, kind, cfg.w).area;
        let stepped = stepped_area(&recs, kind, cfg.w, 4_000_000);
        assert!(
            (exact / stepped - 1.0).abs() < 1e-4,
            "{kind}: {exact} vs {stepped}"
        );
    }
}

#[test]
fn deterministic_sawtooth() {
    let cfg = TandemConfig::new(
        DistributionSpec::det(10.0),
        DistributionSpec::det(1.0),
        DistributionSpec::det(1.0),
        f64::INFINITY,
        DeadlineKind::Soft,
        1000,
        0,
    );
    let res = run_tandem(&cfg).unwrap();
    assert!((res.theta - 7.0).abs() < 1e-9, "{}", res.theta);
}

#[test]
fn mm1_without_deadline_is_aoi() {
    let cfg = TandemConfig::mm1(
        1.0,
        2.0,
        3.0,
        f64::INFINITY,
        DeadlineKind::Soft,
        1_000_000,
        1,
    );
    let res = run_tandem(&cfg).unwrap();
    let aoi = aoi_mm1_tandem(&MM1Params::new(1.0, 2.0, 3.0, f64::INFINITY).unwrap());
    assert!((aoi - 2.18056).abs() < 1e-4);
    assert!((res.theta / aoi - 1.0).abs() < 0.02, "{}", res.theta);
    assert_eq!(res.epsilon_hat, 0.0);
}

#[test]
fn zero_deadline_never_validates() {
    let cfg = TandemConfig::mm1(1.0, 2.0, 3.0, 0.0, DeadlineKind::Hard, 10_000, 1);
    let res = run_tandem(&cfg).unwrap();
    assert!(res.divergent);
    assert!(res.theta.is_infinite());
    assert_eq!(res.throughput, 0.0);
    assert_eq!(res.epsilon_hat, 1.0);
}

#[test]
fn soft_throughput_is_arrival_rate() {
    let res = run_tandem(&TandemConfig::mm1(
        1.0,
        2.0,
        3.0,
        0.5,
        DeadlineKind::Soft,
        1_000_000,
        2,
    ))
    .unwrap();
    assert!((res.throughput - 1.0).abs() < 0.01, "{}", res.throughput);
}

#[test]
fn violation_ratio_matches_closed_form() {
    let res = run_tandem(&TandemConfig::mm1(
        1.0,
        2.0,
        3.0,
        0.5,
        DeadlineKind::Soft,
        1_000_000,
        3,
    ))
    .unwrap();
    let eps = epsilon_w(&MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap());
    assert!((eps - 0.8452).abs() < 1e-4);
    assert!(
        (res.epsilon_hat / 0.845 - 1.0).abs() < 0.01,
        "{}",
        res.epsilon_hat
    );
}

#[test]
fn hard_throughput_spot_value() {
    let res = run_tandem(&TandemConfig::mm1(
        0.1,
        2.0,
        3.0,
        0.5,
        DeadlineKind::Hard,
        1_000_000,
        4,
    ))
    .unwrap();
    assert!(
        (res.throughput / 0.032414 - 1.0).abs() < 0.02,
        "{}",
        res.throughput
    );
}

#[test]
fn plug_in_moments_reproduce_soft_closed_form() {
    let res = run_tandem(&TandemConfig::mm1(
        1.0,
        2.0,
        3.0,
        0.5,
        DeadlineKind::Soft,
        1_000_000,
        6,
    ))
    .unwrap();
    let plug = theta_soft_from_moments(&res.moments).unwrap();
    let exact = theta_soft_mm1(&MM1Params::new(1.0, 2.0, 3.0, 0.5).unwrap());
    assert!((plug / exact - 1.0).abs() < 0.01, "{plug} vs {exact}");
    assert!(
        (res.theta / exact - 1.0).abs() < 0.02,
        "{} vs {exact}",
        res.theta
    );
}

#[test]
fn rerun_is_bit_identical() {
    let mut cfg = TandemConfig::mm1(0.8, 2.0, 3.0, 0.5, DeadlineKind::Soft, 5000, 9);
    cfg.keep_tasks = true;
    let csv = |cfg: &TandemConfig| {
        let mut buf = Vec::new();
        write_tasks_csv(
            run_tandem(cfg).unwrap().per_task.as_ref().unwrap(),
            &mut buf,
        )
        .unwrap();
        buf
    };
    let a = csv(&cfg);
    assert_eq!(a, csv(&cfg));
    assert!(a.starts_with(b"k,tau,d1,tau2,tau1,X,St,Sc,T,valid\n"));
}

#[test]
fn unstable_load_is_flagged_not_rejected() {
    let cfg = TandemConfig::mm1(2.5, 2.0, 3.0, 0.5, DeadlineKind::Soft, 100_000, 1);
    let res = run_tandem(&cfg).unwrap();
    assert!(res.warnings.iter().any(|w| w.starts_with("unstable")));
}

#[test]
fn physical_parameters_must_agree() {
    let mut cfg = TandemConfig::mm1(1.0, 2.0, 3.0, 0.5, DeadlineKind::Soft, 100, 1);
    cfg.physical = Some(Physical {
        l: 1.0,
        r: 2.0,
        b: 1.0,
        f: 3.0,
    });
    assert!(cfg.validate().is_ok());
    cfg.physical = Some(Physical {
        l: 1.0,
        r: 1.0,
        b: 1.0,
        f: 3.0,
    });
    assert!(cfg.validate().is_err());
}

#[test]
fn warmup_must_leave_tasks() {
    let mut cfg = TandemConfig::mm1(1.0, 2.0, 3.0, 0.5, DeadlineKind::Soft, 100, 1);
    cfg.warmup = Some(100);
    assert!(run_tandem(&cfg).is_err());
}

fn stable_params() -> impl Strategy<Value = (f64, f64, f64, f64, u64)> {
    (
        0.2f64..1.5,
        1.15f64..3.0,
        1.15f64..3.0,
        0.05f64..3.0,
        any::<u64>(),
    )
        .prop_map(|(l, ft, fc, w, seed)| (l, l * ft, l * fc, w, seed))
}

fn records(
    l: f64,
    mt: f64,
    mc: f64,
    w: f64,
    kind: DeadlineKind,
    seed: u64,
    k: usize,
) -> Vec<TaskRecord> {
    let cfg = TandemConfig::mm1(l, mt, mc, w, kind, k, seed);
    Lindley::new(&cfg).unwrap().take(k).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn record_invariants((l, mt, mc, w, seed) in stable_params()) {
        let recs = records(l, mt, mc, w, DeadlineKind::Hard, seed, 2000);
        for pair in recs.windows(2) {
            prop_assert!(pair[1].tau1 > pair[0].tau1);
        }
        for r in &recs {
            prop_assert!(r.tau <= r.d1 && r.d1 <= r.tau2 && r.tau2 <= r.tau1);
            prop_assert_eq!(r.tau1, r.tau2 + r.sc);
            prop_assert!(r.d1 >= r.tau + r.st);
            prop_assert_eq!(r.valid, r.t <= w);
        }
    }

    #[test]
    fn accumulator_invariants((l, mt, mc, w, seed) in stable_params()) {
        for kind in [DeadlineKind::Soft, DeadlineKind::Hard] {
            let recs = records(l, mt, mc, w, kind, seed, 2000);
            let mut acc = AoCAccumulator::new(kind, w, 0);
            let mut last_area = 0.0;
            let rank = |o: Option<usize>| o.map_or(-1, |v| v as i64);
            for r in &recs {
                acc.start(r);
                prop_assert!(rank(acc.p) >= rank(acc.g) && rank(acc.g) >= rank(acc.n));
                acc.complete(r);
                prop_assert!(rank(acc.p) >= rank(acc.g) && rank(acc.g) >= rank(acc.n));
                prop_assert!(acc.violations <= acc.completions);
                prop_assert!(acc.area >= last_area);
                last_area = acc.area;
            }
        }
    }

    #[test]
    fn soft_dominates_aoi((l, mt, mc, w, seed) in stable_params()) {
        let recs = records(l, mt, mc, w, DeadlineKind::Soft, seed, 2000);
        let soft = accumulate(&recs, DeadlineKind::Soft, w).area;
        let aoi = accumulate(&recs, DeadlineKind::Soft, f64::INFINITY).area;
        prop_assert!(soft >= aoi);
        if recs.iter().all(|r| r.t <= w) {
            prop_assert_eq!(soft, aoi);
        }
    }

    #[test]
    fn hard_without_deadline_equals_soft((l, mt, mc, _w, seed) in stable_params()) {
        let soft = run_tandem(&TandemConfig::mm1(l, mt, mc, f64::INFINITY, DeadlineKind::Soft, 3000, seed)).unwrap();
        let hard = run_tandem(&TandemConfig::mm1(l, mt, mc, f64::INFINITY, DeadlineKind::Hard, 3000, seed)).unwrap();
        prop_assert_eq!(soft.theta, hard.theta);
    }

    #[test]
    fn per_task_increments_telescope((l, mt, mc, w, seed) in stable_params()) {
        let recs = records(l, mt, mc, w, DeadlineKind::Soft, seed, 2000);
        let acc = accumulate(&recs, DeadlineKind::Soft, w);
        let (mut a, mut g, mut sum) = (0u64, 0u64, 0.0);
        for r in &recs {
            let eps = if g == 0 { 0.0 } else { a as f64 / g as f64 };
            sum += soft_area_increment(r, eps, w);
            g += 1;
            if r.t > w {
                a += 1;
            }
        }
        // The increments attribute area per task; the path integral closes with T_last²/2.
        let t_last = recs.last().unwrap().t;
        prop_assert!((acc.area - sum - 0.5 * t_last * t_last).abs() <= 1e-9 * acc.area);
    }
}
