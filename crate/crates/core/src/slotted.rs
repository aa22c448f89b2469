//! Discrete-time multi-source network with one shared uplink and `μ_c = 1`.
//!
//! Slot `k` runs, in order:
//!
//! 1. a task that finished transmission in slot `k − 1` leaves its transmitter;
//! 2. Bernoulli arrivals, each replacing the task held at its transmitter;
//! 3. if the previous schedule was answered (`Σ d(k−1) = 1`), the policy picks a
//!    transmitter;
//! 4. the scheduled transmitter succeeds with probability `μ_{t,i}`, otherwise it
//!    retries next slot;
//! 5. a task that succeeded in slot `k − 1` leaves the computational node and
//!    sets `c_i(k)` from its delay `z_i(k − 1)`; every other source ages by one;
//! 6. held tasks age and `z_i(k)` is recorded.
//!
//! A transmitter scheduled while empty sends nothing, but the opportunity is
//! consumed as if a task of delay `z_i = c_i` had been sent. This keeps the
//! recursion and the Max-Weight weights consistent for every action; such
//! departures are not counted in `G_i` or `A_i`.
//!
//! Initial state: `c_i(0) = z_i(0) = 0`, `G_i = A_i = 0`, and slot 1 may schedule.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{make_stream, RngStream};
use crate::error::{config, Result};
use crate::stats::{summarize, Summary};
use crate::DeadlineKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    MaxWeight,
    Maf,
    Randomized,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::MaxWeight => "maxweight",
            Policy::Maf => "maf",
            Policy::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxweight" => Ok(Policy::MaxWeight),
            "maf" => Ok(Policy::Maf),
            "randomized" => Ok(Policy::Randomized),
            _ => config(format!("unknown policy `{s}`")),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlottedConfig {
    /// Per-slot arrival probability of each source.
    pub lambda: Vec<f64>,
    /// Per-slot transmission success probability of each transmitter.
    pub mu_t: Vec<f64>,
    /// Deadline in slots; `inf` disables it.
    pub w: f64,
    pub deadline: DeadlineKind,
    pub beta: Vec<f64>,
    /// Randomized policy: idle probability then one entry per source.
    pub q: Vec<f64>,
    /// Horizon `T` in slots.
    pub horizon: u64,
    /// Slots excluded from the average; defaults to `T / 10`.
    #[serde(default)]
    pub warmup: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub replication: u64,
    pub policy: Policy,
    /// A new arrival also replaces a task already being retransmitted.
    #[serde(default = "yes")]
    pub preempt_in_service: bool,
}

impl SlottedConfig {
    /// Identical sources with `β_i = 1` and uniform `q` over idle and every source.
    pub fn symmetric(
        n: usize,
        lambda: f64,
        mu_t: f64,
        w: f64,
        deadline: DeadlineKind,
        horizon: u64,
        policy: Policy,
        seed: u64,
    ) -> Self {
        SlottedConfig {
            lambda: vec![lambda; n],
            mu_t: vec![mu_t; n],
            w,
            deadline,
            beta: vec![1.0; n],
            q: vec![1.0 / (n + 1) as f64; n + 1],
            horizon,
            warmup: None,
            seed,
            replication: 0,
            policy,
            preempt_in_service: true,
        }
    }

    pub fn sources(&self) -> usize {
        self.lambda.len()
    }

    pub fn warmup_slots(&self) -> u64 {
        self.warmup.unwrap_or(self.horizon / 10)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sources();
        if n == 0 {
            return config("need at least one source");
        }
        if self.mu_t.len() != n || self.beta.len() != n || self.q.len() != n + 1 {
            return config(format!(
                "lengths must be lambda = mu_t = beta = N and q = N + 1, got {}, {}, {}, {}",
                n,
                self.mu_t.len(),
                self.beta.len(),
                self.q.len()
            ));
        }
        for (name, xs) in [
            ("lambda", &self.lambda),
            ("mu_t", &self.mu_t),
            ("q", &self.q),
        ] {
            if let Some(v) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return config(format!("{name} entry {v} outside [0, 1]"));
            }
        }
        let total: f64 = self.q.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config(format!("q sums to {total}, not 1"));
        }
        if let Some(b) = self.beta.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return config(format!("beta entry {b} must be > 0"));
        }
        if self.w.is_nan() || self.w < 0.0 {
            return config(format!("deadline w must be >= 0, got {}", self.w));
        }
        if self.horizon == 0 || self.warmup_slots() >= self.horizon {
            return config("need horizon > warmup");
        }
        Ok(())
    }
}

/// `(z + 1 − w)⁺` scaled by the running violation ratio.
#[inline]
pub fn extra_latency(eps: f64, z: f64, w: f64) -> f64 {
    if eps == 0.0 {
        0.0
    } else {
        eps * (z + 1.0 - w).max(0.0)
    }
}

/// Soft-deadline update: `c(k+1)` from `c(k)`, `z(k)` and `d(k+1)`.
#[inline]
pub fn soft_recursion(c: f64, z: f64, departs: bool, eps: f64, w: f64) -> f64 {
    if departs {
        z + 1.0 + extra_latency(eps, z, w)
    } else {
        c + 1.0
    }
}

/// Hard-deadline update: a departure resets the age only if `z + 1 ≤ w`.
#[inline]
pub fn hard_recursion(c: f64, z: f64, departs: bool, w: f64) -> f64 {
    if departs && z + 1.0 <= w {
        z + 1.0
    } else {
        c + 1.0
    }
}

pub fn recursion(kind: DeadlineKind, c: f64, z: f64, departs: bool, eps: f64, w: f64) -> f64 {
    match kind {
        DeadlineKind::Soft => soft_recursion(c, z, departs, eps, w),
        DeadlineKind::Hard => hard_recursion(c, z, departs, w),
    }
}

/// The update gated on the scheduling indicators, as written for one decision
/// window: a departure at `k + 1` is only credited when the source was
/// scheduled at `k` right after a completion at `k − 1`.
///
/// It agrees with [`recursion`] whenever the task needed a single attempt and
/// ignores departures that follow retransmissions.
pub fn gated_recursion(
    kind: DeadlineKind,
    c: f64,
    z: f64,
    prev_completion: bool,
    scheduled: bool,
    departs: bool,
    eps: f64,
    w: f64,
) -> f64 {
    recursion(kind, c, z, prev_completion && scheduled && departs, eps, w)
}

/// Per-source quantities visible to a policy at a decision slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionView {
    /// `c_i(k − 1)`.
    pub c_prev: Vec<f64>,
    /// `c_i(k)`.
    pub c: Vec<f64>,
    /// `z_i(k)`.
    pub z: Vec<f64>,
    /// `A_i / G_i` with `0/0 = 0`.
    pub eps: Vec<f64>,
}

impl DecisionView {
    pub fn sources(&self) -> usize {
        self.c.len()
    }
}

pub fn weight_soft(v: &DecisionView, i: usize, w: f64) -> f64 {
    v.c[i] - v.z[i] - extra_latency(v.eps[i], v.z[i], w)
}

pub fn weight_hard(v: &DecisionView, i: usize, w: f64) -> f64 {
    if v.z[i] + 1.0 <= w {
        v.c[i] - v.z[i]
    } else {
        0.0
    }
}

pub fn weight(kind: DeadlineKind, v: &DecisionView, i: usize, w: f64) -> f64 {
    match kind {
        DeadlineKind::Soft => weight_soft(v, i, w),
        DeadlineKind::Hard => weight_hard(v, i, w),
    }
}

fn argmax_uniform(scores: impl Iterator<Item = f64>, rng: &mut RngStream) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, s) in scores.enumerate() {
        if s > best {
            best = s;
            ties.clear();
            ties.push(i);
        } else if s == best {
            ties.push(i);
        }
    }
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Picks a transmitter, or `None` to idle (randomized policy only).
pub fn choose_action(
    policy: Policy,
    v: &DecisionView,
    cfg: &SlottedConfig,
    rng: &mut RngStream,
) -> Option<usize> {
    match policy {
        Policy::MaxWeight => {
            let scores = (0..v.sources())
                .map(|i| cfg.beta[i] * cfg.mu_t[i] * weight(cfg.deadline, v, i, cfg.w));
            Some(argmax_uniform(scores, rng))
        }
        Policy::Maf => Some(argmax_uniform(v.c.iter().copied(), rng)),
        Policy::Randomized => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (j, q) in cfg.q.iter().enumerate() {
                acc += q;
                if u < acc {
                    return if j == 0 { None } else { Some(j - 1) };
                }
            }
            // Round-off left `u` above the cumulative sum: take the last positive entry.
            let j = cfg.q.iter().rposition(|q| *q > 0.0).unwrap_or(0);
            if j == 0 {
                None
            } else {
                Some(j - 1)
            }
        }
    }
}

/// Expected two-slot drift `E[L(k+1) − L(k−1) | S(k)]` for each candidate transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftProbe {
    pub view: DecisionView,
    pub drift: Vec<f64>,
    /// Actions within `tol` of the smallest drift.
    pub minimizers: Vec<usize>,
}

pub fn drift_probe(v: &DecisionView, cfg: &SlottedConfig) -> DriftProbe {
    let n = v.sources();
    let norm = 1.0 / n as f64;
    let kind = cfg.deadline;
    let step = |i: usize, departs: bool| recursion(kind, v.c[i], v.z[i], departs, v.eps[i], cfg.w);
    let idle_sum: f64 = (0..n)
        .map(|j| cfg.beta[j] * ((v.c[j] - v.c_prev[j]) + (step(j, false) - v.c[j])))
        .sum();
    let drift: Vec<f64> = (0..n)
        .map(|i| {
            let mu = cfg.mu_t[i];
            let idle_i = step(i, false) - v.c[i];
            let expect_i = mu * (step(i, true) - v.c[i]) + (1.0 - mu) * idle_i;
            norm * (idle_sum + cfg.beta[i] * (expect_i - idle_i))
        })
        .collect();
    let best = drift.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * (1.0 + best.abs());
    let minimizers = (0..n).filter(|&i| drift[i] <= best + tol).collect();
    DriftProbe {
        view: v.clone(),
        drift,
        minimizers,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct InFlight {
    source: usize,
    z: f64,
    real: bool,
}

/// Full simulator state at the end of a slot.
#[derive(Debug, Clone)]
pub struct SlottedState {
    pub k: u64,
    pub c: Vec<f64>,
    pub z: Vec<f64>,
    pub has_task: Vec<bool>,
    pub task_age: Vec<u64>,
    /// Task waiting behind a retransmission when in-service preemption is off.
    pub queued: Vec<Option<u64>>,
    pub g: Vec<u64>,
    pub a: Vec<u64>,
    pub in_service: Option<usize>,
    /// The next slot may schedule.
    pub opportunity: bool,
    release: Option<usize>,
    in_compute: Option<InFlight>,
}

/// Indicators of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SlotEvents {
    /// Decision taken this slot; `Some(None)` is an idle decision.
    pub decision: Option<Option<usize>>,
    /// Source whose task left the computational node this slot.
    pub departed: Option<usize>,
    /// Whether that departure carried a real task, and whether it met the deadline.
    pub real: bool,
    pub valid: bool,
}

/// Streams of one replication: arrivals, transmission outcomes, policy draws.
pub struct SlottedStreams {
    pub arrivals: RngStream,
    pub transmit: RngStream,
    pub policy: RngStream,
}

impl SlottedStreams {
    pub fn new(seed: u64, rep: u64) -> Self {
        SlottedStreams {
            arrivals: make_stream(seed, rep * 8),
            transmit: make_stream(seed, rep * 8 + 1),
            policy: make_stream(seed, rep * 8 + 2),
        }
    }
}

impl SlottedState {
    pub fn new(n: usize) -> Self {
        SlottedState {
            k: 0,
            c: vec![0.0; n],
            z: vec![0.0; n],
            has_task: vec![false; n],
            task_age: vec![0; n],
            queued: vec![None; n],
            g: vec![0; n],
            a: vec![0; n],
            in_service: None,
            opportunity: true,
            release: None,
            in_compute: None,
        }
    }

    pub fn eps(&self, i: usize) -> f64 {
        if self.g[i] == 0 {
            0.0
        } else {
            self.a[i] as f64 / self.g[i] as f64
        }
    }

    /// What a policy sees after this slot's arrivals: `c(k) = c(k−1) + 1`
    /// because nothing can leave the node in a slot that schedules.
    fn view(&self) -> DecisionView {
        let n = self.c.len();
        let c: Vec<f64> = self.c.iter().map(|c| c + 1.0).collect();
        let z = (0..n)
            .map(|i| {
                if self.has_task[i] {
                    (self.task_age[i] + 1) as f64
                } else {
                    c[i]
                }
            })
            .collect();
        DecisionView {
            c_prev: self.c.clone(),
            c,
            z,
            eps: (0..n).map(|i| self.eps(i)).collect(),
        }
    }

    /// Advances one slot; `on_decision` sees the view and the chosen action.
    pub fn step_with(
        &mut self,
        cfg: &SlottedConfig,
        rng: &mut SlottedStreams,
        mut on_decision: impl FnMut(&DecisionView, Option<usize>),
    ) -> SlotEvents {
        let n = self.c.len();
        let mut ev = SlotEvents::default();
        self.k += 1;

        if let Some(i) = self.release.take() {
            self.has_task[i] = false;
            if let Some(age) = self.queued[i].take() {
                self.has_task[i] = true;
                self.task_age[i] = age;
            }
        }

        for i in 0..n {
            let u: f64 = rng.arrivals.random();
            if u < cfg.lambda[i] {
                if self.in_service == Some(i) && self.has_task[i] && !cfg.preempt_in_service {
                    self.queued[i] = Some(0);
                } else {
                    self.has_task[i] = true;
                    self.task_age[i] = 0;
                }
            }
        }

        if self.opportunity {
            assert!(self.in_service.is_none() && self.in_compute.is_none());
            let view = self.view();
            let action = choose_action(cfg.policy, &view, cfg, &mut rng.policy);
            on_decision(&view, action);
            ev.decision = Some(action);
            if let Some(i) = action {
                self.in_service = Some(i);
                self.opportunity = false;
            } else {
                assert_eq!(
                    cfg.policy,
                    Policy::Randomized,
                    "only the randomized policy idles"
                );
            }
        }

        let u: f64 = rng.transmit.random();
        let mut sent = None;
        if let Some(i) = self.in_service {
            if u < cfg.mu_t[i] {
                sent = Some(i);
                self.in_service = None;
            }
        }

        let departing = self.in_compute.take();
        for i in 0..n {
            match departing {
                Some(f) if f.source == i => {
                    // An empty schedule carries z = c and no lateness penalty.
                    let eps = if f.real { self.eps(i) } else { 0.0 };
                    let next = recursion(cfg.deadline, self.c[i], f.z, true, eps, cfg.w);
                    let valid = f.z + 1.0 <= cfg.w;
                    if f.real {
                        self.g[i] += 1;
                        if !valid {
                            self.a[i] += 1;
                        }
                    }
                    self.c[i] = next;
                    ev.departed = Some(i);
                    ev.real = f.real;
                    ev.valid = valid;
                }
                _ => self.c[i] += 1.0,
            }
        }
        if departing.is_some() {
            assert!(
                !self.opportunity,
                "a completion must answer an outstanding schedule"
            );
            self.opportunity = true;
        }

        for i in 0..n {
            if self.has_task[i] {
                self.task_age[i] += 1;
                self.z[i] = self.task_age[i] as f64;
            } else {
                self.z[i] = self.c[i];
            }
            if let Some(age) = self.queued[i].as_mut() {
                *age += 1;
            }
        }

        if let Some(i) = sent {
            self.in_compute = Some(InFlight {
                source: i,
                z: self.z[i],
                real: self.has_task[i],
            });
            self.release = Some(i);
        }
        ev
    }

    pub fn step(&mut self, cfg: &SlottedConfig, rng: &mut SlottedStreams) -> SlotEvents {
        self.step_with(cfg, rng, |_, _| {})
    }
}

/// One `(k, i)` row of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: u64,
    pub i: usize,
    pub c: f64,
    pub z: f64,
    pub a: bool,
    pub d: bool,
    /// Set on real departures only.
    pub valid: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct SlottedResult {
    /// `(1/(T'N)) Σ_k Σ_i c_i(k)` over the post-warmup slots.
    pub mean: f64,
    pub per_source: Vec<f64>,
    pub departures: u64,
    pub decisions: u64,
    pub trace: Option<Vec<TraceRow>>,
}

/// Runs one replication, optionally logging a trace.
pub fn run_slotted_traced(cfg: &SlottedConfig, keep_trace: bool) -> Result<SlottedResult> {
    cfg.validate()?;
    let n = cfg.sources();
    let mut st = SlottedState::new(n);
    let mut rng = SlottedStreams::new(cfg.seed, cfg.replication);
    let warm = cfg.warmup_slots();
    let mut sums = vec![0.0; n];
    let mut departures = 0;
    let mut decisions = 0;
    let mut trace = keep_trace.then(|| Vec::with_capacity(cfg.horizon as usize * n));
    let mut prev_departures = 1u32;
    for _ in 0..cfg.horizon {
        let ev = st.step(cfg, &mut rng);
        let scheduled = matches!(ev.decision, Some(Some(_))) as u32;
        // Σ a(k) = Σ d(k−1), except that an idle draw carries the opportunity.
        if cfg.policy == Policy::Randomized {
            assert!(scheduled <= prev_departures.max(ev.decision.is_some() as u32));
        } else {
            assert_eq!(scheduled, prev_departures);
        }
        prev_departures = ev.departed.is_some() as u32;
        departures += prev_departures as u64;
        decisions += scheduled as u64;
        if st.k > warm {
            for (s, c) in sums.iter_mut().zip(&st.c) {
                *s += c;
            }
        }
        if let Some(t) = trace.as_mut() {
            for i in 0..n {
                t.push(TraceRow {
                    k: st.k,
                    i,
                    c: st.c[i],
                    z: st.z[i],
                    a: ev.decision == Some(Some(i)),
                    d: ev.departed == Some(i),
                    valid: (ev.departed == Some(i) && ev.real).then_some(ev.valid),
                });
            }
        }
    }
    let slots = (cfg.horizon - warm) as f64;
    let per_source: Vec<f64> = sums.iter().map(|s| s / slots).collect();
    Ok(SlottedResult {
        mean: per_source.iter().sum::<f64>() / n as f64,
        per_source,
        departures,
        decisions,
        trace,
    })
}

pub fn run_slotted(cfg: &SlottedConfig) -> Result<SlottedResult> {
    run_slotted_traced(cfg, false)
}

/// Independent replications `0..reps` run in parallel, summarized in order.
pub fn run_replications(cfg: &SlottedConfig, reps: u64) -> Result<(Vec<f64>, Summary)> {
    let means = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.replication = r;
            run_slotted(&c).map(|res| res.mean)
        })
        .collect::<Result<Vec<f64>>>()?;
    let s = summarize(&means);
    Ok((means, s))
}

/// Recomputes every `c_i(k)` of a trace from `c_i(k−1)`, `z_i(k−1)` and `d_i(k)`.
///
/// `A_i` and `G_i` are rebuilt from the `valid` column; a departure with an
/// empty `valid` is an empty schedule and carries no penalty. Returns the first
/// mismatching row, or `None` when the whole trace is reproduced.
pub fn replay_trace(rows: &[TraceRow], n: usize, kind: DeadlineKind, w: f64) -> Option<TraceRow> {
    let mut c = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut g = vec![0u64; n];
    let mut a = vec![0u64; n];
    for row in rows {
        let i = row.i;
        let phantom = row.d && row.valid.is_none();
        let eps = if g[i] == 0 || phantom {
            0.0
        } else {
            a[i] as f64 / g[i] as f64
        };
        let next = recursion(kind, c[i], z[i], row.d, eps, w);
        if next.to_bits() != row.c.to_bits() {
            return Some(*row);
        }
        if let Some(valid) = row.valid {
            g[i] += 1;
            if !valid {
                a[i] += 1;
            }
        }
        c[i] = row.c;
        z[i] = row.z;
    }
    None
}

/// Writes `k,i,c,z,a,d,valid` rows; `valid` is empty except on real departures.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "i", "c", "z", "a", "d", "valid"])?;
    for r in rows {
        w.write_record(&[
            r.k.to_string(),
            r.i.to_string(),
            r.c.to_string(),
            r.z.to_string(),
            u8::from(r.a).to_string(),
            u8::from(r.d).to_string(),
            r.valid.map(|v| u8::from(v).to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`].
pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    let bad =
        |line: usize, what: &str| crate::Error::Parse(format!("trace row {line}: bad {what}"));
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let get = |j: usize| rec.get(j).unwrap_or("");
        let flag = |j: usize, what: &str| match get(j) {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(bad(line + 2, what)),
        };
        rows.push(TraceRow {
            k: get(0).parse().map_err(|_| bad(line + 2, "k"))?,
            i: get(1).parse().map_err(|_| bad(line + 2, "i"))?,
            c: get(2).parse().map_err(|_| bad(line + 2, "c"))?,
            z: get(3).parse().map_err(|_| bad(line + 2, "z"))?,
            a: flag(4, "a")?,
            d: flag(5, "d")?,
            valid: if get(6).is_empty() {
                None
            } else {
                Some(flag(6, "valid")?)
            },
        });
    }
    Ok(rows)
}
