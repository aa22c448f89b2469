//! Figure presets and the artifact bundle they write.
//!
//! Every run writes its CSVs and SVGs plus `manifest.json`, which records the
//! resolved configuration, the seed and a SHA-256 of every file. Work items
//! are `(grid point, replication)` pairs mapped in parallel and collected in
//! order, so the bytes do not depend on the thread count.

use std::fs;
use std::path::{Path, PathBuf};

use aoc_core::closed_form::{
    theta_hard_mm1_approx, theta_soft_mm1, throughput_mm1_approx, MM1Params,
};
use aoc_core::pareto::{argmax_throughput, frontier, lambda_sweep, weak_pareto_check, ParetoQuery};
use aoc_core::slotted::{run_slotted, Policy, SlottedConfig};
use aoc_core::stats::{summarize, Summary};
use aoc_core::tandem::{run_tandem, TandemConfig};
use aoc_core::DeadlineKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compare::{compare_report, AnalyticRow, Bound, SimRow};
use crate::error::{LabError, Result};
use crate::plot::{render_plot, PlotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Soft-deadline M/M/1 sweep against the closed form.
    Fig6SoftSweep,
    /// Hard-deadline sweep against the approximations.
    Fig7HardSweep,
    /// Analytic freshness/throughput curves and frontiers.
    Fig8Tradeoff,
    /// Slotted multi-source policy comparison.
    Fig9Slotted,
    /// Tandem sweep over user grids.
    Custom,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Fig6SoftSweep => "fig6_soft_sweep",
            ExperimentKind::Fig7HardSweep => "fig7_hard_sweep",
            ExperimentKind::Fig8Tradeoff => "fig8_tradeoff",
            ExperimentKind::Fig9Slotted => "fig9_slotted",
            ExperimentKind::Custom => "custom",
        }
    }
}

/// Unset grids take the preset's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<Vec<DeadlineKind>>,
    /// Tasks per tandem replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<usize>,
    /// Slots per slotted replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<Policy>>,
    /// Throughput floors per frontier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_points: Option<usize>,
    /// Rates per trade-off curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            seed: 0,
            replications: None,
            out: None,
            lambda: None,
            mu_t: None,
            mu_c: None,
            w: None,
            deadline: None,
            tasks: None,
            horizon: None,
            sources: None,
            policies: None,
            u_points: None,
            sweep_points: None,
        }
    }

    /// Fills preset defaults and checks every grid.
    pub fn resolve(&self) -> Result<Plan> {
        let fig67_lambda: Vec<f64> = (1..=9).map(|i| i as f64 / 5.0).collect();
        let fig9_lambda = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        let custom = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>> {
            v.clone()
                .ok_or_else(|| LabError::Config(format!("custom experiment needs `{name}`")))
        };
        let pick = |v: &Option<Vec<f64>>, d: Vec<f64>| v.clone().unwrap_or(d);
        let plan = match self.kind {
            ExperimentKind::Fig6SoftSweep | ExperimentKind::Fig7HardSweep => {
                let kind = if self.kind == ExperimentKind::Fig6SoftSweep {
                    DeadlineKind::Soft
                } else {
                    DeadlineKind::Hard
                };
                Plan {
                    lambda: pick(&self.lambda, fig67_lambda),
                    mu_t: pick(&self.mu_t, vec![2.0, 3.0]),
                    mu_c: pick(&self.mu_c, vec![3.0]),
                    w: pick(&self.w, vec![0.5]),
                    deadline: self.deadline.clone().unwrap_or(vec![kind]),
                    replications: self.replications.unwrap_or(5),
                    tasks: self.tasks.unwrap_or(1_000_000),
                    ..Plan::empty(self)
                }
            }
            ExperimentKind::Fig8Tradeoff => Plan {
                mu_t: pick(&self.mu_t, vec![2.0]),
                mu_c: pick(&self.mu_c, vec![3.0, 4.0, 5.0, 6.0]),
                w: pick(&self.w, vec![0.5]),
                u_points: self.u_points.unwrap_or(40),
                sweep_points: self.sweep_points.unwrap_or(200),
                ..Plan::empty(self)
            },
            ExperimentKind::Fig9Slotted => Plan {
                lambda: pick(&self.lambda, fig9_lambda),
                mu_t: pick(&self.mu_t, vec![0.5]),
                w: pick(&self.w, vec![4.0, 10.0]),
                deadline: self
                    .deadline
                    .clone()
                    .unwrap_or(vec![DeadlineKind::Soft, DeadlineKind::Hard]),
                replications: self.replications.unwrap_or(30),
                horizon: self.horizon.unwrap_or(100_000),
                sources: self.sources.unwrap_or(5),
                policies: self.policies.clone().unwrap_or(vec![
                    Policy::MaxWeight,
                    Policy::Maf,
                    Policy::Randomized,
                ]),
                ..Plan::empty(self)
            },
            ExperimentKind::Custom => Plan {
                lambda: custom(&self.lambda, "lambda")?,
                mu_t: custom(&self.mu_t, "mu_t")?,
                mu_c: custom(&self.mu_c, "mu_c")?,
                w: custom(&self.w, "w")?,
                deadline: self
                    .deadline
                    .clone()
                    .ok_or_else(|| LabError::Config("custom experiment needs `deadline`".into()))?,
                replications: self.replications.unwrap_or(5),
                tasks: self.tasks.unwrap_or(100_000),
                ..Plan::empty(self)
            },
        };
        plan.check()?;
        Ok(plan)
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replications: u64,
    pub lambda: Vec<f64>,
    pub mu_t: Vec<f64>,
    pub mu_c: Vec<f64>,
    pub w: Vec<f64>,
    pub deadline: Vec<DeadlineKind>,
    pub tasks: usize,
    pub horizon: u64,
    pub sources: usize,
    pub policies: Vec<Policy>,
    pub u_points: usize,
    pub sweep_points: usize,
}

impl Plan {
    fn empty(cfg: &ExperimentConfig) -> Self {
        Plan {
            kind: cfg.kind,
            seed: cfg.seed,
            replications: 1,
            lambda: Vec::new(),
            mu_t: Vec::new(),
            mu_c: Vec::new(),
            w: Vec::new(),
            deadline: Vec::new(),
            tasks: 0,
            horizon: 0,
            sources: 0,
            policies: Vec::new(),
            u_points: 0,
            sweep_points: 0,
        }
    }

    fn check(&self) -> Result<()> {
        let need: &[(&str, usize)] = match self.kind {
            ExperimentKind::Fig8Tradeoff => &[
                ("mu_t", self.mu_t.len()),
                ("mu_c", self.mu_c.len()),
                ("w", self.w.len()),
                ("u_points", self.u_points),
                ("sweep_points", self.sweep_points.saturating_sub(1)),
            ],
            ExperimentKind::Fig9Slotted => &[
                ("lambda", self.lambda.len()),
                ("mu_t", self.mu_t.len()),
                ("w", self.w.len()),
                ("deadline", self.deadline.len()),
                ("policies", self.policies.len()),
                ("replications", self.replications as usize),
                ("horizon", self.horizon as usize),
                ("sources", self.sources),
            ],
            _ => &[
                ("lambda", self.lambda.len()),
                ("mu_t", self.mu_t.len()),
                ("mu_c", self.mu_c.len()),
                ("w", self.w.len()),
                ("deadline", self.deadline.len()),
                ("replications", self.replications as usize),
                ("tasks", self.tasks),
            ],
        };
        if let Some((name, _)) = need.iter().find(|(_, n)| *n == 0) {
            return Err(LabError::Config(format!("`{name}` must be non-empty")));
        }
        if self.kind == ExperimentKind::Fig8Tradeoff && self.sweep_points < 2 {
            return Err(LabError::Config("`sweep_points` must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub tool_version: String,
    /// The configuration as given, in TOML; feed it back to rerun.
    pub config_toml: String,
    pub config_sha256: String,
    pub files: Vec<FileEntry>,
    pub failed_rows: usize,
    pub total_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub out: PathBuf,
    pub manifest: Manifest,
}

impl Bundle {
    /// `Partial` when any row errored.
    pub fn status(&self) -> Result<()> {
        if self.manifest.failed_rows > 0 {
            return Err(LabError::Partial {
                failed: self.manifest.failed_rows,
                total: self.manifest.total_rows,
            });
        }
        Ok(())
    }

    pub fn read(&self, name: &str) -> Result<String> {
        Ok(fs::read_to_string(self.out.join(name))?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Shortest round-trip decimal; empty for a missing value.
fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

struct Writer {
    out: PathBuf,
    files: Vec<FileEntry>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.out.join(name), bytes)
            .map_err(|e| LabError::Config(format!("{}: {e}", self.out.join(name).display())))?;
        self.files.push(FileEntry {
            name: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| LabError::Config(e.to_string()))?;
        self.put(name, &bytes)?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn svg(&mut self, name: &str, csv_text: &str, spec: &PlotSpec) -> Result<()> {
        let svg = render_plot(csv_text, spec)?;
        self.put(name, svg.as_bytes())
    }
}

/// Runs `cfg` and writes the bundle into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Bundle> {
    let plan = cfg.resolve()?;
    fs::create_dir_all(out).map_err(|e| LabError::Config(format!("{}: {e}", out.display())))?;
    let mut w = Writer {
        out: out.to_path_buf(),
        files: Vec::new(),
    };
    let (failed_rows, total_rows) = match plan.kind {
        ExperimentKind::Fig8Tradeoff => tradeoff(&plan, &mut w)?,
        ExperimentKind::Fig9Slotted => slotted(&plan, &mut w)?,
        _ => tandem_sweep(&plan, &mut w)?,
    };
    let config_toml = toml::to_string(cfg).map_err(|e| LabError::Config(e.to_string()))?;
    let manifest = Manifest {
        experiment: plan.kind.as_str().into(),
        seed: plan.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(config_toml.as_bytes()),
        config_toml,
        files: w.files,
        failed_rows,
        total_rows,
    };
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(out.join("manifest.json"), json)?;
    Ok(Bundle {
        out: out.to_path_buf(),
        manifest,
    })
}

/// Re-runs the configuration stored in `manifest_path` into `out` and lists
/// the files whose hash differs from the recorded one.
pub fn rerun(manifest_path: &Path, out: &Path) -> Result<(Bundle, Vec<String>)> {
    let old: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let cfg: ExperimentConfig = toml::from_str(&old.config_toml)?;
    let bundle = run_experiment(&cfg, out)?;
    let changed = old
        .files
        .iter()
        .filter(|f| !bundle.manifest.files.contains(f))
        .map(|f| f.name.clone())
        .collect();
    Ok((bundle, changed))
}

#[derive(Debug, Clone, Copy)]
struct TandemPoint {
    deadline: DeadlineKind,
    mu_t: f64,
    mu_c: f64,
    w: f64,
    lambda: f64,
}

impl TandemPoint {
    fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}/{}",
            self.deadline, self.mu_t, self.mu_c, self.w, self.lambda
        )
    }

    /// `(Θ, Ξ)` from the closed forms.
    fn analytic(&self) -> Result<(f64, f64)> {
        let p = MM1Params::new(self.lambda, self.mu_t, self.mu_c, self.w)?;
        Ok(match self.deadline {
            DeadlineKind::Soft => (theta_soft_mm1(&p), self.lambda),
            DeadlineKind::Hard => (theta_hard_mm1_approx(&p), throughput_mm1_approx(&p)),
        })
    }
}

struct RepOutcome {
    theta: f64,
    xi: f64,
    eps: f64,
}

fn tandem_sweep(plan: &Plan, w: &mut Writer) -> Result<(usize, usize)> {
    let mut points = Vec::new();
    for &deadline in &plan.deadline {
        for &mu_t in &plan.mu_t {
            for &mu_c in &plan.mu_c {
                for &wv in &plan.w {
                    for &lambda in &plan.lambda {
                        points.push(TandemPoint {
                            deadline,
                            mu_t,
                            mu_c,
                            w: wv,
                            lambda,
                        });
                    }
                }
            }
        }
    }
    let reps = plan.replications;
    let runs: Vec<std::result::Result<RepOutcome, String>> = (0..points.len() as u64 * reps)
        .into_par_iter()
        .map(|job| {
            let p = points[(job / reps) as usize];
            let mut cfg = TandemConfig::mm1(
                p.lambda, p.mu_t, p.mu_c, p.w, p.deadline, plan.tasks, plan.seed,
            );
            cfg.replication = job % reps;
            p.analytic().map_err(|e| e.to_string())?;
            let r = run_tandem(&cfg).map_err(|e| e.to_string())?;
            Ok(RepOutcome {
                theta: r.theta,
                xi: r.throughput,
                eps: r.epsilon_hat,
            })
        })
        .collect();

    let mut rep_rows = Vec::new();
    let mut status = Vec::new();
    let (mut an_theta, mut an_xi, mut sim_theta, mut sim_xi) = (vec![], vec![], vec![], vec![]);
    for (i, p) in points.iter().enumerate() {
        let chunk = &runs[i * reps as usize..(i + 1) * reps as usize];
        let err = chunk.iter().find_map(|r| r.as_ref().err().cloned());
        let (thetas, xis): (Vec<f64>, Vec<f64>) = chunk
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| (r.theta, r.xi))
            .unzip();
        for (r, run) in chunk.iter().enumerate() {
            if let Ok(run) = run {
                rep_rows.push(vec![
                    p.deadline.to_string(),
                    num(Some(p.mu_t)),
                    num(Some(p.mu_c)),
                    num(Some(p.w)),
                    num(Some(p.lambda)),
                    r.to_string(),
                    num(Some(run.theta)),
                    num(Some(run.xi)),
                    num(Some(run.eps)),
                ]);
            }
        }
        status.push(err.clone());
        if err.is_some() {
            continue;
        }
        let (at, ax) = p.analytic()?;
        let key = p.key();
        an_theta.push(AnalyticRow {
            key: key.clone(),
            value: at,
        });
        an_xi.push(AnalyticRow {
            key: key.clone(),
            value: ax,
        });
        let sim = |key: String, s: Summary| SimRow {
            key,
            mean: s.mean,
            ci95_lo: s.ci95_lo,
            ci95_hi: s.ci95_hi,
        };
        sim_theta.push(sim(key.clone(), summarize(&thetas)));
        sim_xi.push(sim(key, summarize(&xis)));
    }
    let bounds = |d: DeadlineKind| match d {
        DeadlineKind::Soft => (Bound::None, Bound::None),
        DeadlineKind::Hard => (Bound::Lower, Bound::Upper),
    };
    let mut theta_cmp = Vec::new();
    let mut xi_cmp = Vec::new();
    for &d in &plan.deadline {
        let prefix = format!("{d}/");
        let pick_a = |rows: &[AnalyticRow]| -> Vec<AnalyticRow> {
            rows.iter()
                .filter(|r| r.key.starts_with(&prefix))
                .cloned()
                .collect()
        };
        let pick_s = |rows: &[SimRow]| -> Vec<SimRow> {
            rows.iter()
                .filter(|r| r.key.starts_with(&prefix))
                .cloned()
                .collect()
        };
        let (a, s) = (pick_a(&an_theta), pick_s(&sim_theta));
        if !a.is_empty() {
            theta_cmp.extend(compare_report(&a, &s, bounds(d).0)?);
            xi_cmp.extend(compare_report(
                &pick_a(&an_xi),
                &pick_s(&sim_xi),
                bounds(d).1,
            )?);
        }
    }

    let mut rows = Vec::new();
    let mut plot_rows = Vec::new();
    let mut xi_plot_rows = Vec::new();
    let mut failed = 0;
    for (p, err) in points.iter().zip(&status) {
        let mut row = vec![
            p.deadline.to_string(),
            num(Some(p.mu_t)),
            num(Some(p.mu_c)),
            num(Some(p.w)),
            num(Some(p.lambda)),
        ];
        match err {
            Some(e) => {
                failed += 1;
                row.extend(std::iter::repeat(String::new()).take(12));
                row.push(reps.to_string());
                row.push(format!("error: {e}"));
            }
            None => {
                let key = p.key();
                let t = theta_cmp.iter().find(|c| c.key == key).expect("compared");
                let x = xi_cmp.iter().find(|c| c.key == key).expect("compared");
                for c in [t, x] {
                    row.extend([
                        num(Some(c.analytic)),
                        num(Some(c.sim_mean)),
                        num(Some(c.ci95_lo)),
                        num(Some(c.ci95_hi)),
                        num(Some(c.rel_err)),
                        u8::from(c.bound_respected).to_string(),
                    ]);
                }
                row.push(reps.to_string());
                row.push("ok".into());
                let curve = format!("{} mu_t={} mu_c={} w={}", p.deadline, p.mu_t, p.mu_c, p.w);
                for (label, th, xi) in [
                    ("analytic", t.analytic, x.analytic),
                    ("simulated", t.sim_mean, x.sim_mean),
                ] {
                    plot_rows.push(vec![
                        format!("{curve} {label}"),
                        num(Some(p.lambda)),
                        num(Some(th)),
                    ]);
                    xi_plot_rows.push(vec![
                        format!("{curve} {label}"),
                        num(Some(p.lambda)),
                        num(Some(xi)),
                    ]);
                }
            }
        }
        rows.push(row);
    }

    w.csv(
        "tandem.csv",
        &[
            "deadline",
            "mu_t",
            "mu_c",
            "w",
            "lambda",
            "theta_analytic",
            "theta_sim",
            "theta_ci95_lo",
            "theta_ci95_hi",
            "theta_rel_err",
            "theta_bound_ok",
            "xi_analytic",
            "xi_sim",
            "xi_ci95_lo",
            "xi_ci95_hi",
            "xi_rel_err",
            "xi_bound_ok",
            "replications",
            "status",
        ],
        &rows,
    )?;
    w.csv(
        "tandem_replications.csv",
        &[
            "deadline",
            "mu_t",
            "mu_c",
            "w",
            "lambda",
            "replication",
            "theta",
            "xi",
            "epsilon_hat",
        ],
        &rep_rows,
    )?;
    let name = plan.kind.as_str();
    let theta_csv = w.csv(
        "theta_curves.csv",
        &["curve", "lambda", "theta"],
        &plot_rows,
    )?;
    w.svg(
        &format!("{name}_theta.svg"),
        &theta_csv,
        &PlotSpec::new(
            "lambda",
            "theta",
            Some("curve"),
            "Average AoC against arrival rate",
        ),
    )?;
    if plan.deadline.contains(&DeadlineKind::Hard) {
        let xi_csv = w.csv("xi_curves.csv", &["curve", "lambda", "xi"], &xi_plot_rows)?;
        w.svg(
            &format!("{name}_xi.svg"),
            &xi_csv,
            &PlotSpec::new(
                "lambda",
                "xi",
                Some("curve"),
                "Computation throughput against arrival rate",
            ),
        )?;
    }
    Ok((failed, points.len()))
}

fn tradeoff(plan: &Plan, w: &mut Writer) -> Result<(usize, usize)> {
    let mut queries = Vec::new();
    for &mu_t in &plan.mu_t {
        for &mu_c in &plan.mu_c {
            for &wv in &plan.w {
                queries.push(ParetoQuery::new(mu_t, mu_c, wv, 0.0));
            }
        }
    }
    let mut curve_rows = Vec::new();
    let mut front_rows = Vec::new();
    let mut failed = 0;
    for q in &queries {
        let label = format!("mu_t={} mu_c={} w={}", q.mu_t, q.mu_c, q.w);
        let head = |q: &ParetoQuery| {
            vec![
                label.clone(),
                num(Some(q.mu_t)),
                num(Some(q.mu_c)),
                num(Some(q.w)),
            ]
        };
        if let Err(e) = q.validate() {
            failed += 1;
            let mut row = head(q);
            row.extend(std::iter::repeat(String::new()).take(6));
            row.push(format!("error: {e}"));
            front_rows.push(row);
            continue;
        }
        for (l, xi, theta) in lambda_sweep(q, plan.sweep_points) {
            let mut row = head(q);
            row.extend([num(Some(l)), num(Some(xi)), num(Some(theta))]);
            curve_rows.push(row);
        }
        let top = q.xi(argmax_throughput(q));
        let u: Vec<f64> = (0..plan.u_points)
            .map(|i| top * i as f64 / plan.u_points as f64)
            .collect();
        let probes = q.scan_grid(10_000);
        for p in frontier(q, &u)? {
            let weak = if p.feasible {
                u8::from(weak_pareto_check(&p, q, &probes)?).to_string()
            } else {
                String::new()
            };
            let mut row = head(q);
            row.extend([
                num(Some(p.u)),
                num(Some(p.lambda_star)),
                num(p.theta),
                num(p.xi),
                u8::from(p.feasible).to_string(),
                weak,
                "ok".into(),
            ]);
            front_rows.push(row);
        }
    }
    let curves = w.csv(
        "tradeoff.csv",
        &["curve", "mu_t", "mu_c", "w", "lambda", "xi", "theta"],
        &curve_rows,
    )?;
    w.csv(
        "pareto.csv",
        &[
            "curve",
            "mu_t",
            "mu_c",
            "w",
            "u",
            "lambda_star",
            "theta",
            "xi",
            "feasible",
            "weak_pareto",
            "status",
        ],
        &front_rows,
    )?;
    w.svg(
        "fig8_tradeoff.svg",
        &curves,
        &PlotSpec::new(
            "xi",
            "theta",
            Some("curve"),
            "Average AoC against computation throughput",
        ),
    )?;
    Ok((failed, queries.len()))
}

#[derive(Debug, Clone, Copy)]
struct SlotPoint {
    policy: Policy,
    deadline: DeadlineKind,
    w: f64,
    mu_t: f64,
    lambda: f64,
}

fn slotted(plan: &Plan, w: &mut Writer) -> Result<(usize, usize)> {
    let mut points = Vec::new();
    for &deadline in &plan.deadline {
        for &wv in &plan.w {
            for &mu_t in &plan.mu_t {
                for &lambda in &plan.lambda {
                    for &policy in &plan.policies {
                        points.push(SlotPoint {
                            policy,
                            deadline,
                            w: wv,
                            mu_t,
                            lambda,
                        });
                    }
                }
            }
        }
    }
    let reps = plan.replications;
    let runs: Vec<std::result::Result<f64, String>> = (0..points.len() as u64 * reps)
        .into_par_iter()
        .map(|job| {
            let p = points[(job / reps) as usize];
            let mut cfg = SlottedConfig::symmetric(
                plan.sources,
                p.lambda,
                p.mu_t,
                p.w,
                p.deadline,
                plan.horizon,
                p.policy,
                plan.seed,
            );
            cfg.replication = job % reps;
            run_slotted(&cfg).map(|r| r.mean).map_err(|e| e.to_string())
        })
        .collect();
    let head = |p: &SlotPoint| {
        vec![
            p.policy.as_str().to_string(),
            p.deadline.to_string(),
            num(Some(p.w)),
            num(Some(p.mu_t)),
            num(Some(p.lambda)),
        ]
    };
    let mut rows = Vec::new();
    let mut rep_rows = Vec::new();
    let mut failed = 0;
    for (i, p) in points.iter().enumerate() {
        let chunk = &runs[i * reps as usize..(i + 1) * reps as usize];
        let mut row = head(p);
        if let Some(e) = chunk.iter().find_map(|r| r.as_ref().err()) {
            failed += 1;
            row.extend([
                String::new(),
                String::new(),
                String::new(),
                reps.to_string(),
                format!("error: {e}"),
            ]);
        } else {
            let means: Vec<f64> = chunk
                .iter()
                .map(|r| *r.as_ref().expect("checked"))
                .collect();
            for (r, m) in means.iter().enumerate() {
                let mut rr = head(p);
                rr.extend([r.to_string(), num(Some(*m))]);
                rep_rows.push(rr);
            }
            let s = summarize(&means);
            row.extend([
                num(Some(s.mean)),
                num(Some(s.ci95_lo)),
                num(Some(s.ci95_hi)),
                reps.to_string(),
                "ok".into(),
            ]);
        }
        rows.push(row);
    }
    let header = [
        "policy",
        "deadline",
        "w",
        "mu_t",
        "lambda",
        "mean",
        "ci95_lo",
        "ci95_hi",
        "replications",
        "status",
    ];
    w.csv("slotted.csv", &header, &rows)?;
    w.csv(
        "slotted_replications.csv",
        &[
            "policy",
            "deadline",
            "w",
            "mu_t",
            "lambda",
            "replication",
            "mean",
        ],
        &rep_rows,
    )?;
    for &d in &plan.deadline {
        for &wv in &plan.w {
            let subset: Vec<Vec<String>> = rows
                .iter()
                .filter(|r| r[1] == d.as_str() && r[2] == num(Some(wv)))
                .cloned()
                .collect();
            let mut sub = csv::Writer::from_writer(Vec::new());
            sub.write_record(header)?;
            for r in &subset {
                sub.write_record(r)?;
            }
            let text = String::from_utf8(
                sub.into_inner()
                    .map_err(|e| LabError::Config(e.to_string()))?,
            )
            .expect("csv output is utf-8");
            w.svg(
                &format!("fig9_{d}_w{wv}.svg"),
                &text,
                &PlotSpec::new(
                    "lambda",
                    "mean",
                    Some("policy"),
                    &format!("Average AoC, {d} deadline, w = {wv}"),
                ),
            )?;
        }
    }
    Ok((failed, points.len()))
}
