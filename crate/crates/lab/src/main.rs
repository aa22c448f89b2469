use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoc_core::closed_form::{
    aoi_mm1_tandem, epsilon_w, theta_hard_mm1_approx, theta_soft_mm1, throughput_mm1_approx,
    MM1Params,
};
use aoc_core::gg::{GGAnalytic, GGInputs};
use aoc_core::pareto::{frontier, ParetoQuery};
use aoc_core::slotted::{run_slotted_traced, write_trace_csv};
use aoc_core::stats::summarize;
use aoc_core::tandem::{run_tandem, write_tasks_csv, TandemConfig};
use aoc_lab::config::{GgSource, LabConfig};
use aoc_lab::experiment::{rerun, run_experiment, ExperimentConfig, ExperimentKind};
use aoc_lab::plot::{render_plot, PlotSpec};
use aoc_lab::{with_threads, LabError, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "aoc-lab", version, about = "Age of Computing experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML file with one table per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; single-table commands print to stdout without it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replications: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Fig6SoftSweep,
    Fig7HardSweep,
    Fig8Tradeoff,
    Fig9Slotted,
    Custom,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Fig6SoftSweep => ExperimentKind::Fig6SoftSweep,
            Kind::Fig7HardSweep => ExperimentKind::Fig7HardSweep,
            Kind::Fig8Tradeoff => ExperimentKind::Fig8Tradeoff,
            Kind::Fig9Slotted => ExperimentKind::Fig9Slotted,
            Kind::Custom => ExperimentKind::Custom,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form values over the `[analytic]` rate grid.
    Analytic,
    /// Replicated tandem simulation from `[tandem]`.
    SimulateTandem,
    /// Replicated slotted simulation from `[slotted]`.
    SimulateSlotted {
        /// Also write the slot trace of replication 0.
        #[arg(long)]
        trace: bool,
    },
    /// Quadrature values from `[gg]`.
    GgAnalytic,
    /// Frontier over the `[pareto]` throughput floors.
    Pareto,
    /// A figure preset, the `[experiment]` table, or a manifest rerun.
    Experiment {
        #[arg(long, value_enum, conflicts_with = "manifest")]
        kind: Option<Kind>,
        /// Rerun this manifest and check the file hashes.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// SVG line chart of CSV columns.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        series: Option<String>,
        #[arg(long, default_value = "")]
        title: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aoc-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.common.config {
        Some(p) => LabConfig::load(p)?,
        None => LabConfig::default(),
    };
    let threads = cli.common.threads.or(cfg.run.threads);
    with_threads(threads, || dispatch(&cli.cmd, &cli.common, &cfg))?
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(name), text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| LabError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn n(v: f64) -> String {
    v.to_string()
}

fn dispatch(cmd: &Cmd, c: &Common, cfg: &LabConfig) -> Result<()> {
    let reps = c.replications.or(cfg.run.replications).unwrap_or(1);
    if reps == 0 {
        return Err(LabError::Config("replications must be >= 1".into()));
    }
    match cmd {
        Cmd::Analytic => {
            let a = LabConfig::section(&cfg.analytic, "analytic")?;
            let rows = a
                .lambda
                .iter()
                .map(|&l| {
                    let p = MM1Params::new(l, a.mu_t, a.mu_c, a.w)?;
                    Ok(vec![
                        n(l),
                        n(a.mu_t),
                        n(a.mu_c),
                        n(a.w),
                        n(epsilon_w(&p)),
                        n(aoi_mm1_tandem(&p)),
                        n(theta_soft_mm1(&p)),
                        n(theta_hard_mm1_approx(&p)),
                        n(throughput_mm1_approx(&p)),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            let header = [
                "lambda",
                "mu_t",
                "mu_c",
                "w",
                "epsilon",
                "aoi",
                "theta_soft",
                "theta_hard",
                "xi",
            ];
            emit(&c.out, "analytic.csv", &to_csv(&header, &rows)?)
        }
        Cmd::SimulateTandem => {
            let mut t: TandemConfig = LabConfig::section(&cfg.tandem, "tandem")?.clone();
            if let Some(s) = c.seed {
                t.seed = s;
            }
            t.keep_tasks &= reps == 1;
            let runs = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut t = t.clone();
                    t.replication = r;
                    run_tandem(&t)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            for w in runs.iter().flat_map(|r| &r.warnings) {
                eprintln!("warning: {w}");
            }
            let rows: Vec<Vec<String>> = runs
                .iter()
                .enumerate()
                .map(|(r, x)| {
                    vec![
                        r.to_string(),
                        n(x.theta),
                        n(x.throughput),
                        n(x.epsilon_hat),
                        x.valid_completions.to_string(),
                        u8::from(x.divergent).to_string(),
                    ]
                })
                .collect();
            let header = [
                "replication",
                "theta",
                "throughput",
                "epsilon_hat",
                "valid_completions",
                "divergent",
            ];
            emit(&c.out, "tandem.csv", &to_csv(&header, &rows)?)?;
            if c.out.is_some() {
                let mut sum = Vec::new();
                for (name, xs) in [
                    ("theta", runs.iter().map(|r| r.theta).collect::<Vec<_>>()),
                    ("throughput", runs.iter().map(|r| r.throughput).collect()),
                    ("epsilon_hat", runs.iter().map(|r| r.epsilon_hat).collect()),
                ] {
                    let s = summarize(&xs);
                    sum.push(vec![
                        name.into(),
                        n(s.mean),
                        n(s.ci95_lo),
                        n(s.ci95_hi),
                        reps.to_string(),
                    ]);
                }
                let header = ["quantity", "mean", "ci95_lo", "ci95_hi", "replications"];
                emit(&c.out, "tandem_summary.csv", &to_csv(&header, &sum)?)?;
                if let Some(tasks) = &runs[0].per_task {
                    let mut buf = Vec::new();
                    write_tasks_csv(tasks, &mut buf)?;
                    emit(&c.out, "tasks.csv", &String::from_utf8_lossy(&buf))?;
                }
            }
            Ok(())
        }
        Cmd::SimulateSlotted { trace } => {
            let mut s = LabConfig::section(&cfg.slotted, "slotted")?.clone();
            if let Some(seed) = c.seed {
                s.seed = seed;
            }
            let runs = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut s = s.clone();
                    s.replication = r;
                    run_slotted_traced(&s, *trace && r == 0)
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let means: Vec<f64> = runs.iter().map(|r| r.mean).collect();
            let sm = summarize(&means);
            let lambda = s.lambda.iter().sum::<f64>() / s.sources() as f64;
            let row = vec![
                s.policy.as_str().to_string(),
                n(lambda),
                n(s.w),
                s.deadline.to_string(),
                n(sm.mean),
                n(sm.ci95_lo),
                n(sm.ci95_hi),
                reps.to_string(),
            ];
            let header = [
                "policy",
                "lambda",
                "w",
                "deadline",
                "mean",
                "ci95_lo",
                "ci95_hi",
                "replications",
            ];
            emit(&c.out, "slotted.csv", &to_csv(&header, &[row])?)?;
            if c.out.is_some() {
                let rows: Vec<Vec<String>> = means
                    .iter()
                    .enumerate()
                    .map(|(r, m)| vec![r.to_string(), n(*m)])
                    .collect();
                emit(
                    &c.out,
                    "slotted_replications.csv",
                    &to_csv(&["replication", "mean"], &rows)?,
                )?;
            }
            if let Some(tr) = runs.first().and_then(|r| r.trace.as_ref()) {
                let dir = c.out.as_deref().unwrap_or(Path::new("."));
                std::fs::create_dir_all(dir)?;
                write_trace_csv(tr, std::fs::File::create(dir.join("trace.csv"))?)?;
            }
            Ok(())
        }
        Cmd::GgAnalytic => {
            let g = LabConfig::section(&cfg.gg, "gg")?;
            let inputs = match g.source {
                GgSource::Mm1 => {
                    let need = |v: Option<f64>, k: &str| {
                        v.ok_or_else(|| {
                            LabError::Config(format!("[gg] source = \"mm1\" needs `{k}`"))
                        })
                    };
                    let p = MM1Params::new(
                        need(g.lambda, "lambda")?,
                        need(g.mu_t, "mu_t")?,
                        need(g.mu_c, "mu_c")?,
                        g.w,
                    )?;
                    GGInputs::mm1(&p, g.n)?
                }
                GgSource::Records => {
                    let need = |v: &Option<aoc_core::dist::DistributionSpec>, k: &str| {
                        v.clone().ok_or_else(|| {
                            LabError::Config(format!("[gg] source = \"records\" needs `{k}`"))
                        })
                    };
                    let (a, t, k) = (
                        need(&g.arrival, "arrival")?,
                        need(&g.transmit, "transmit")?,
                        need(&g.compute, "compute")?,
                    );
                    let mut run = TandemConfig::new(
                        a.clone(),
                        t.clone(),
                        k.clone(),
                        g.w,
                        aoc_core::DeadlineKind::Soft,
                        g.calibration_tasks,
                        c.seed.unwrap_or(g.seed),
                    );
                    run.keep_tasks = true;
                    let res = run_tandem(&run)?;
                    let recs = res.per_task.expect("tasks kept");
                    GGInputs::from_records(&recs[run.warmup_count()..], &a, &t, &k, g.w, g.n)?
                }
            };
            for w in inputs.validate()? {
                eprintln!("warning: {w}");
            }
            let m = GGAnalytic::new(inputs)?;
            let row = vec![
                n(m.g1()),
                n(m.g2()),
                n(1.0 - m.ft_cdf(g.w)),
                n(m.theta_soft()),
                n(m.theta_hard()),
                n(m.throughput()),
            ];
            let header = ["g1", "g2", "epsilon", "theta_soft", "theta_hard", "xi"];
            emit(&c.out, "gg.csv", &to_csv(&header, &[row])?)
        }
        Cmd::Pareto => {
            let p = LabConfig::section(&cfg.pareto, "pareto")?;
            let mut q = ParetoQuery::new(p.mu_t, p.mu_c, p.w, 0.0);
            q.resolution = p.resolution;
            let rows: Vec<Vec<String>> = frontier(&q, &p.u)?
                .iter()
                .map(|pt| {
                    vec![
                        n(pt.u),
                        n(pt.lambda_star),
                        pt.theta.map(n).unwrap_or_default(),
                        pt.xi.map(n).unwrap_or_default(),
                        u8::from(pt.feasible).to_string(),
                    ]
                })
                .collect();
            let header = ["u", "lambda_star", "theta", "xi", "feasible"];
            emit(&c.out, "pareto.csv", &to_csv(&header, &rows)?)
        }
        Cmd::Experiment { kind, manifest } => {
            if let Some(m) = manifest {
                let out = c.out.clone().unwrap_or_else(|| m.with_file_name("rerun"));
                let (bundle, changed) = rerun(m, &out)?;
                if !changed.is_empty() {
                    return Err(LabError::Numeric(format!(
                        "rerun differs in {}",
                        changed.join(", ")
                    )));
                }
                eprintln!(
                    "rerun into {} matches all {} files",
                    out.display(),
                    bundle.manifest.files.len()
                );
                return bundle.status();
            }
            let mut e = match (kind, &cfg.experiment) {
                (Some(k), _) => ExperimentConfig::preset((*k).into()),
                (None, Some(e)) => e.clone(),
                (None, None) => {
                    return Err(LabError::Config(
                        "give --kind or an [experiment] table".into(),
                    ))
                }
            };
            if let Some(s) = c.seed {
                e.seed = s;
            }
            if c.replications.is_some() {
                e.replications = c.replications;
            }
            let out = c
                .out
                .clone()
                .or_else(|| e.out.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(e.kind.as_str()));
            let bundle = run_experiment(&e, &out)?;
            eprintln!(
                "wrote {} files to {} ({} of {} rows failed)",
                bundle.manifest.files.len() + 1,
                out.display(),
                bundle.manifest.failed_rows,
                bundle.manifest.total_rows
            );
            bundle.status()
        }
        Cmd::Plot {
            csv,
            x,
            y,
            series,
            title,
        } => {
            let text = std::fs::read_to_string(csv)
                .map_err(|e| LabError::Config(format!("{}: {e}", csv.display())))?;
            let spec = match (x, y, &cfg.plot) {
                (Some(x), Some(y), _) => PlotSpec::new(x, y, series.as_deref(), title),
                (None, None, Some(p)) => p.clone(),
                _ => {
                    return Err(LabError::Config(
                        "give --x and --y or a [plot] table".into(),
                    ))
                }
            };
            let svg = render_plot(&text, &spec)?;
            let name = csv.with_extension("svg");
            let name = name
                .file_name()
                .and_then(|s| s.to_str())
                .unwrap_or("plot.svg");
            emit(&c.out, name, &svg)
        }
    }
}
