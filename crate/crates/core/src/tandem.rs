//! Sample-path simulation of the source → transmitter → computational node line.
//!
//! Timestamps come from the FCFS Lindley recursions
//!
//! ```text
//! d1_k  = max(τ_k, d1_{k-1}) + S_{k,t}
//! τ''_k = max(d1_k, τ'_{k-1})
//! τ'_k  = τ''_k + S_{k,c}
//! ```
//!
//! and the AoC area is integrated exactly between consecutive completions.
//! Between `τ'_{k-1}` and `τ'_k` the age grows with slope 1 from the last
//! informative task, and under a soft deadline the in-service task adds
//! `ε̂ (t − τ_k − w)⁺` while it computes. `ε̂ = A/G` only moves at completions,
//! so each interval integrates in closed form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::closed_form::MomentInputs;
use crate::dist::{make_stream, DistributionSpec, RngStream, Sampler};
use crate::error::{config, Result};
use crate::DeadlineKind;

/// Stream roles inside one replication.
const ARRIVAL: u64 = 0;
const TRANSMIT: u64 = 1;
const COMPUTE: u64 = 2;
const ROLES_PER_REPLICATION: u64 = 8;

/// Stream id for `role` in replication `rep`.
pub fn stream_id(rep: u64, role: u64) -> u64 {
    rep * ROLES_PER_REPLICATION + role
}

/// Arrival, transmit and compute streams of one replication.
pub fn replication_streams(seed: u64, rep: u64) -> [RngStream; 3] {
    [
        make_stream(seed, stream_id(rep, ARRIVAL)),
        make_stream(seed, stream_id(rep, TRANSMIT)),
        make_stream(seed, stream_id(rep, COMPUTE)),
    ]
}

fn default_guard() -> f64 {
    1e3
}

/// Task size and link/processor speeds; means must agree with the service laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    /// Task size in bits.
    pub l: f64,
    /// Link rate in bits per unit time.
    pub r: f64,
    /// Work per task in cycles.
    pub b: f64,
    /// Processor speed in cycles per unit time.
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TandemConfig {
    pub arrival: DistributionSpec,
    pub transmit: DistributionSpec,
    pub compute: DistributionSpec,
    /// Deadline; `inf` disables it.
    pub w: f64,
    pub deadline: DeadlineKind,
    /// Number of simulated tasks `K`.
    pub tasks: usize,
    /// Tasks excluded from the statistics; defaults to `K / 10`.
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Replication index selecting the stream family.
    #[serde(default)]
    pub replication: u64,
    /// Divergence guard as a multiple of the running mean delay.
    #[serde(default = "default_guard")]
    pub guard: f64,
    #[serde(default)]
    pub physical: Option<Physical>,
    /// Keep every [`TaskRecord`] in the result.
    #[serde(default)]
    pub keep_tasks: bool,
}

impl TandemConfig {
    pub fn new(
        arrival: DistributionSpec,
        transmit: DistributionSpec,
        compute: DistributionSpec,
        w: f64,
        deadline: DeadlineKind,
        tasks: usize,
        seed: u64,
    ) -> Self {
        TandemConfig {
            arrival,
            transmit,
            compute,
            w,
            deadline,
            tasks,
            warmup: None,
            seed,
            replication: 0,
            guard: default_guard(),
            physical: None,
            keep_tasks: false,
        }
    }

    /// Exponential arrivals and services.
    pub fn mm1(
        lambda: f64,
        mu_t: f64,
        mu_c: f64,
        w: f64,
        deadline: DeadlineKind,
        tasks: usize,
        seed: u64,
    ) -> Self {
        Self::new(
            DistributionSpec::exp(lambda),
            DistributionSpec::exp(mu_t),
            DistributionSpec::exp(mu_c),
            w,
            deadline,
            tasks,
            seed,
        )
    }

    pub fn warmup_count(&self) -> usize {
        self.warmup.unwrap_or(self.tasks / 10)
    }

    pub fn validate(&self) -> Result<()> {
        self.arrival.validate()?;
        self.transmit.validate()?;
        self.compute.validate()?;
        if self.w.is_nan() || self.w < 0.0 {
            return config(format!("deadline w must be >= 0, got {}", self.w));
        }
        if self.tasks == 0 || self.warmup_count() >= self.tasks {
            return config(format!(
                "need tasks > warmup, got {} <= {}",
                self.tasks,
                self.warmup_count()
            ));
        }
        if !(self.guard > 1.0) {
            return config(format!("guard multiple must exceed 1, got {}", self.guard));
        }
        if let Some(ph) = self.physical {
            for (name, v) in [("L", ph.l), ("R", ph.r), ("B", ph.b), ("F", ph.f)] {
                if !(v.is_finite() && v > 0.0) {
                    return config(format!("physical parameter {name} must be > 0, got {v}"));
                }
            }
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
            if !close(self.transmit.mean(), ph.l / ph.r) {
                return config(format!(
                    "transmit mean {} differs from L/R = {}",
                    self.transmit.mean(),
                    ph.l / ph.r
                ));
            }
            if !close(self.compute.mean(), ph.b / ph.f) {
                return config(format!(
                    "compute mean {} differs from B/F = {}",
                    self.compute.mean(),
                    ph.b / ph.f
                ));
            }
        }
        Ok(())
    }

    /// Warning text when the mean inter-arrival does not exceed both service means.
    pub fn stability_warning(&self) -> Option<String> {
        let x = self.arrival.mean();
        let s = self.transmit.mean().max(self.compute.mean());
        (x <= s).then(|| format!("unstable: mean inter-arrival {x} <= max mean service {s}"))
    }
}

/// One task's timestamps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskRecord {
    pub k: usize,
    /// Arrival at the source.
    pub tau: f64,
    /// Departure from the transmitter.
    pub d1: f64,
    /// Start of computation.
    pub tau2: f64,
    /// Completion.
    pub tau1: f64,
    pub x: f64,
    pub st: f64,
    pub sc: f64,
    /// End-to-end delay `τ'_k − τ_k`.
    pub t: f64,
    pub valid: bool,
}

impl TaskRecord {
    /// Sojourn in the transmission queue.
    pub fn u_t(&self) -> f64 {
        self.d1 - self.tau
    }

    /// Sojourn in the computation queue.
    pub fn u_c(&self) -> f64 {
        self.tau1 - self.d1
    }

    /// Waiting time before computation.
    pub fn w_c(&self) -> f64 {
        self.tau2 - self.d1
    }
}

/// Lindley recursion over fresh variates; yields tasks in completion order.
pub struct Lindley {
    arrival: Sampler,
    transmit: Sampler,
    compute: Sampler,
    streams: [RngStream; 3],
    w: f64,
    deadline: DeadlineKind,
    k: usize,
    tau: f64,
    d1: f64,
    tau1: f64,
}

impl Lindley {
    pub fn new(cfg: &TandemConfig) -> Result<Self> {
        Ok(Lindley {
            arrival: cfg.arrival.sampler()?,
            transmit: cfg.transmit.sampler()?,
            compute: cfg.compute.sampler()?,
            streams: replication_streams(cfg.seed, cfg.replication),
            w: cfg.w,
            deadline: cfg.deadline,
            k: 0,
            tau: 0.0,
            d1: 0.0,
            tau1: 0.0,
        })
    }
}

impl Iterator for Lindley {
    type Item = TaskRecord;

    #[inline]
    fn next(&mut self) -> Option<TaskRecord> {
        let [ra, rt, rc] = &mut self.streams;
        let x = self.arrival.sample(ra);
        let st = self.transmit.sample(rt);
        let sc = self.compute.sample(rc);
        let tau = self.tau + x;
        let d1 = tau.max(self.d1) + st;
        let tau2 = d1.max(self.tau1);
        let tau1 = tau2 + sc;
        let t = tau1 - tau;
        let valid = match self.deadline {
            DeadlineKind::Soft => true,
            DeadlineKind::Hard => t <= self.w,
        };
        let rec = TaskRecord {
            k: self.k,
            tau,
            d1,
            tau2,
            tau1,
            x,
            st,
            sc,
            t,
            valid,
        };
        self.k += 1;
        self.tau = tau;
        self.d1 = d1;
        self.tau1 = tau1;
        Some(rec)
    }
}

#[inline]
fn hinge(v: f64) -> f64 {
    v.max(0.0)
}

/// Area under the soft AoC attributed to task `k`:
/// `X T + X²/2 + (ε̂/2)[((T − w)⁺)² − ((T − S_c − w)⁺)²]`.
pub fn soft_area_increment(rec: &TaskRecord, eps_hat: f64, w: f64) -> f64 {
    let base = rec.x * rec.t + 0.5 * rec.x * rec.x;
    if w.is_infinite() || eps_hat == 0.0 {
        return base;
    }
    base + 0.5 * eps_hat * (hinge(rec.t - w).powi(2) - hinge(rec.t - rec.sc - w).powi(2))
}

/// Hard-deadline area of one cycle: invalid tasks followed by a valid one.
///
/// Returns `None` when the last task is not valid, so the caller keeps
/// accumulating into the next cycle.
pub fn hard_cycle_area(cycle: &[TaskRecord], w: f64) -> Option<f64> {
    let last = cycle.last()?;
    if last.t > w {
        return None;
    }
    let sum_x: f64 = cycle.iter().map(|r| r.x).sum();
    let t_m = last.t;
    Some(0.5 * (sum_x + t_m).powi(2) - 0.5 * t_m * t_m)
}

/// Sums over completed hard-deadline cycles inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CycleStats {
    pub cycles: u64,
    pub sum_m: f64,
    pub sum_m2: f64,
    pub sum_x: f64,
    pub sum_x_sq: f64,
    pub sum_tm: f64,
    pub sum_tm_x: f64,
}

impl CycleStats {
    pub fn mean_m(&self) -> f64 {
        self.sum_m / self.cycles as f64
    }

    pub fn mean_m2(&self) -> f64 {
        self.sum_m2 / self.cycles as f64
    }

    pub fn mean_tm(&self) -> f64 {
        self.sum_tm / self.cycles as f64
    }
}

/// Per-task moment sums inside the window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct MomentSums {
    n: f64,
    x: f64,
    x2: f64,
    xt: f64,
    hinge_t: f64,
    hinge_t_sc: f64,
}

/// Running AoC bookkeeping for one sample path.
#[derive(Debug, Clone)]
pub struct AoCAccumulator {
    kind: DeadlineKind,
    w: f64,
    warmup: usize,
    /// Index of the informative task.
    pub n: Option<usize>,
    /// Index of the task in computation.
    pub p: Option<usize>,
    /// Index of the latest completed task.
    pub g: Option<usize>,
    /// Completions with delay above `w`.
    pub violations: u64,
    pub completions: u64,
    pub area: f64,
    pub horizon: f64,
    tau_n: f64,
    t_last: f64,
    window_start: f64,
    in_window: bool,
    valid_in_window: u64,
    cycle_open: bool,
    cycle_m: f64,
    cycle_x: f64,
    cycles: CycleStats,
    sums: MomentSums,
}

impl AoCAccumulator {
    pub fn new(kind: DeadlineKind, w: f64, warmup: usize) -> Self {
        AoCAccumulator {
            kind,
            w,
            warmup,
            n: None,
            p: None,
            g: None,
            violations: 0,
            completions: 0,
            area: 0.0,
            horizon: 0.0,
            tau_n: 0.0,
            t_last: 0.0,
            window_start: 0.0,
            in_window: warmup == 0,
            valid_in_window: 0,
            cycle_open: false,
            cycle_m: 0.0,
            cycle_x: 0.0,
            cycles: CycleStats::default(),
            sums: MomentSums::default(),
        }
    }

    /// `A/G`, with `0/0 = 0`.
    pub fn eps_hat(&self) -> f64 {
        if self.completions == 0 {
            0.0
        } else {
            self.violations as f64 / self.completions as f64
        }
    }

    /// Marks the start of computation of task `rec.k`.
    pub fn start(&mut self, rec: &TaskRecord) {
        self.p = Some(rec.k);
    }

    /// Integrates up to `rec.tau1` and applies the completion of `rec`.
    pub fn complete(&mut self, rec: &TaskRecord) {
        if self.in_window {
            let a = rec.tau1 - self.tau_n;
            let b = self.t_last - self.tau_n;
            let mut inc = 0.5 * (a * a - b * b);
            if self.kind == DeadlineKind::Soft && self.w.is_finite() {
                let eps = self.eps_hat();
                if eps > 0.0 {
                    inc += 0.5
                        * eps
                        * (hinge(rec.t - self.w).powi(2)
                            - hinge(rec.tau2 - rec.tau - self.w).powi(2));
                }
            }
            self.area += inc;
            self.horizon = rec.tau1 - self.window_start;
            self.observe_moments(rec);
            if rec.valid {
                self.valid_in_window += 1;
            }
        }

        self.completions += 1;
        if rec.t > self.w {
            self.violations += 1;
        }
        self.g = Some(rec.k);
        if rec.valid {
            self.n = Some(rec.k);
            self.tau_n = rec.tau;
        }
        self.t_last = rec.tau1;

        if !self.in_window && rec.k + 1 == self.warmup {
            self.in_window = true;
            self.window_start = rec.tau1;
        }
    }

    pub fn push(&mut self, rec: &TaskRecord) {
        self.start(rec);
        self.complete(rec);
    }

    fn observe_moments(&mut self, rec: &TaskRecord) {
        let s = &mut self.sums;
        s.n += 1.0;
        s.x += rec.x;
        s.x2 += rec.x * rec.x;
        s.xt += rec.x * rec.t;
        if self.w.is_finite() {
            s.hinge_t += hinge(rec.t - self.w).powi(2);
            s.hinge_t_sc += hinge(rec.t - rec.sc - self.w).powi(2);
        }

        // Cycles are counted from the first in-window task with delay <= w.
        let closes = rec.t <= self.w;
        if self.cycle_open {
            self.cycle_m += 1.0;
            self.cycle_x += rec.x;
            if closes {
                let c = &mut self.cycles;
                c.cycles += 1;
                c.sum_m += self.cycle_m;
                c.sum_m2 += self.cycle_m * self.cycle_m;
                c.sum_x += self.cycle_x;
                c.sum_x_sq += self.cycle_x * self.cycle_x;
                c.sum_tm += rec.t;
                c.sum_tm_x += rec.t * self.cycle_x;
            }
        }
        if closes {
            self.cycle_open = true;
            self.cycle_m = 0.0;
            self.cycle_x = 0.0;
        }
    }

    /// Valid completions per unit time over the window.
    pub fn empirical_throughput(&self) -> f64 {
        if self.horizon > 0.0 {
            self.valid_in_window as f64 / self.horizon
        } else {
            0.0
        }
    }

    /// `A/G` at the final completion.
    pub fn empirical_epsilon(&self) -> f64 {
        self.eps_hat()
    }

    pub fn valid_in_window(&self) -> u64 {
        self.valid_in_window
    }

    pub fn cycle_stats(&self) -> CycleStats {
        self.cycles
    }

    /// Plug-in estimates of the stationary moments.
    pub fn moments(&self) -> MomentInputs {
        let s = &self.sums;
        let c = &self.cycles;
        let n = s.n.max(1.0);
        let cyc = (c.cycles as f64).max(1.0);
        MomentInputs {
            e_x: s.x / n,
            e_x2: s.x2 / n,
            e_xt: s.xt / n,
            e_hinge_t: s.hinge_t / n,
            e_hinge_t_sc: s.hinge_t_sc / n,
            eps_w: self.eps_hat(),
            e_tm: c.sum_tm / cyc,
            e_m: c.sum_m / cyc,
            e_m2: c.sum_m2 / cyc,
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone)]
pub struct TandemResult {
    /// Time-average AoC; `INFINITY` when `divergent`.
    pub theta: f64,
    pub throughput: f64,
    pub epsilon_hat: f64,
    /// No valid completion inside the window.
    pub divergent: bool,
    pub area: f64,
    pub horizon: f64,
    pub valid_completions: u64,
    pub cycle_stats: CycleStats,
    pub moments: MomentInputs,
    pub warnings: Vec<String>,
    pub per_task: Option<Vec<TaskRecord>>,
}

pub fn run_tandem(cfg: &TandemConfig) -> Result<TandemResult> {
    cfg.validate()?;
    let mut warnings: Vec<String> = cfg.stability_warning().into_iter().collect();
    let mut acc = AoCAccumulator::new(cfg.deadline, cfg.w, cfg.warmup_count());
    let mut log = cfg.keep_tasks.then(|| Vec::with_capacity(cfg.tasks));
    let mut delay_sum = 0.0;
    let mut guard_tripped = false;
    for rec in Lindley::new(cfg)?.take(cfg.tasks) {
        if !guard_tripped && rec.k >= 100 {
            let mean = delay_sum / rec.k as f64;
            if rec.t > cfg.guard * mean {
                guard_tripped = true;
                warnings.push(format!(
                    "divergent queue: task {} delay {} exceeds {} x running mean {}",
                    rec.k, rec.t, cfg.guard, mean
                ));
            }
        }
        delay_sum += rec.t;
        acc.push(&rec);
        if let Some(log) = log.as_mut() {
            log.push(rec);
        }
    }
    let divergent = acc.valid_in_window() == 0 || acc.horizon <= 0.0;
    if divergent {
        warnings.push("no valid completion inside the measurement window".to_string());
    }
    Ok(TandemResult {
        theta: if divergent {
            f64::INFINITY
        } else {
            acc.area / acc.horizon
        },
        throughput: acc.empirical_throughput(),
        epsilon_hat: acc.empirical_epsilon(),
        divergent,
        area: acc.area,
        horizon: acc.horizon,
        valid_completions: acc.valid_in_window(),
        cycle_stats: acc.cycle_stats(),
        moments: acc.moments(),
        warnings,
        per_task: log,
    })
}

/// Writes `k,tau,d1,tau2,tau1,X,St,Sc,T,valid` rows.
pub fn write_tasks_csv<W: Write>(records: &[TaskRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "k", "tau", "d1", "tau2", "tau1", "X", "St", "Sc", "T", "valid",
    ])?;
    for r in records {
        w.write_record(&[
            r.k.to_string(),
            r.tau.to_string(),
            r.d1.to_string(),
            r.tau2.to_string(),
            r.tau1.to_string(),
            r.x.to_string(),
            r.st.to_string(),
            r.sc.to_string(),
            r.t.to_string(),
            u8::from(r.valid).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
