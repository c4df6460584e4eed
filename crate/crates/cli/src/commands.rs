//! The `run`, `sweep`, `verify` and `ingest-movielens` commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nlprec::optimizers::{run, trace_to_csv, RunTrace};
use nlprec::problems::{load_movielens, StochasticOracle};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::json_number;
use crate::verify::{self, Certificate, VerifyOptions, FAULT_SHIFT};

/// Flags shared by every command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalOptions {
    /// overrides the config's `output_dir`
    pub out: Option<PathBuf>,
    /// worker threads; the rayon default when absent
    pub jobs: Option<usize>,
    /// added to every configured seed
    pub seed_offset: u64,
}

impl GlobalOptions {
    fn output_dir(&self, cfg_dir: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg_dir.to_path_buf())
    }

    fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            if n == 0 {
                bail!("--jobs must be at least 1");
            }
            builder = builder.num_threads(n);
        }
        Ok(builder.build()?.install(f))
    }
}

/// Result of one seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub label: String,
    pub seed: u64,
    pub csv: PathBuf,
    pub final_f: f64,
    pub min_stationarity: f64,
    pub iterations: usize,
    pub abort: Option<String>,
    pub error: Option<String>,
}

impl SeedOutcome {
    pub fn completed(&self) -> bool {
        self.abort.is_none() && self.error.is_none()
    }

    fn to_json(&self) -> Value {
        json!({
            "label": self.label,
            "seed": self.seed,
            "csv": self.csv.file_name().map(|n| n.to_string_lossy().into_owned()),
            "final_f": json_number(self.final_f),
            "min_stationarity": json_number(self.min_stationarity),
            "iterations": self.iterations,
            "abort": self.abort,
            "error": self.error,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub runs: Vec<SeedOutcome>,
    pub certificates: Vec<Certificate>,
}

impl RunSummary {
    /// All runs completed and every requested certificate passed.
    pub fn success(&self) -> bool {
        self.runs.iter().all(SeedOutcome::completed) && self.certificates.iter().all(Certificate::passed)
    }
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn outcome(label: &str, seed: u64, csv: PathBuf, result: &Result<RunTrace, String>) -> SeedOutcome {
    match result {
        Ok(t) => SeedOutcome {
            label: label.to_string(),
            seed,
            csv,
            final_f: t.final_value(),
            min_stationarity: t.min_stationarity(),
            iterations: t.final_state.k,
            abort: t.abort.clone(),
            error: None,
        },
        Err(e) => SeedOutcome {
            label: label.to_string(),
            seed,
            csv,
            final_f: f64::NAN,
            min_stationarity: f64::NAN,
            iterations: 0,
            abort: None,
            error: Some(e.clone()),
        },
    }
}

/// Certificates requested through `certify`, evaluated on one trace.
fn run_certificates(
    cfg: &ExperimentConfig,
    problem: &dyn StochasticOracle,
    trace: &RunTrace,
) -> anyhow::Result<Vec<Certificate>> {
    let mut out = Vec::new();
    if cfg.certify.is_empty() {
        return Ok(out);
    }
    let reference = cfg.reference()?;
    let f_star = problem
        .f_star()
        .context("certificates need a problem with a known optimal value")?;
    let smooth = problem
        .smoothness()
        .filter(|s| s.reference == reference)
        .context("certificates need a smoothness constant relative to the configured reference")?;
    let m = &cfg.method;
    for name in &cfg.certify {
        let label = format!("{name}/seed={}", trace.seed);
        match name.as_str() {
            "momentum-sublinear" => {
                let c = verify::certify_momentum_sublinear(&label, &trace.records, smooth.constant, m.gamma, m.beta, f_star)?;
                out.push(c.into());
            }
            "momentum-linear" => {
                let mu = problem
                    .dominance_constant()
                    .context("momentum-linear needs a gradient-dominance constant")?;
                for c in verify::certify_momentum_linear(&label, &trace.records, m.gamma, m.beta, mu, f_star)? {
                    out.push(c.into());
                }
            }
            other => bail!("unknown certificate `{other}`"),
        }
    }
    Ok(out)
}

/// Runs every seed of `cfg` (each offset by `seed_offset`) and writes one CSV per
/// seed into `dir`, returning outcomes in seed order.
fn run_seeds(
    cfg: &ExperimentConfig,
    problem: &dyn StochasticOracle,
    label: &str,
    dir: &Path,
    seed_offset: u64,
) -> anyhow::Result<(Vec<SeedOutcome>, Vec<Certificate>)> {
    let reference = cfg.reference()?;
    let run_cfg = cfg.run_config();
    let echo = cfg.to_toml();
    let results: Vec<anyhow::Result<(SeedOutcome, Vec<Certificate>)>> = cfg
        .seeds
        .par_iter()
        .map(|&s| {
            let seed = s + seed_offset;
            let csv = dir.join(format!("{label}_seed{seed}.csv"));
            let x0 = cfg.initial_point(problem, seed);
            let result = run(problem, &reference, &run_cfg, x0, seed)
                .map(|mut t| {
                    t.config_echo = echo.clone();
                    t
                })
                .map_err(|e| e.to_string());
            let mut certs = Vec::new();
            if let Ok(t) = &result {
                write(&csv, &trace_to_csv(&t.records))?;
                certs = run_certificates(cfg, problem, t)?;
            }
            Ok((outcome(label, seed, csv, &result), certs))
        })
        .collect();
    let mut runs = Vec::new();
    let mut certs = Vec::new();
    for r in results {
        let (o, c) = r?;
        runs.push(o);
        certs.extend(c);
    }
    Ok((runs, certs))
}

/// `run <config>`: one CSV per seed, the resolved config and `summary.json`.
pub fn cmd_run(cfg: &ExperimentConfig, opts: &GlobalOptions) -> anyhow::Result<RunSummary> {
    let dir = opts.output_dir(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let problem = cfg.build_problem()?;
    let label = cfg.method.name.clone();
    let (runs, certificates) =
        opts.install(|| run_seeds(cfg, problem.as_ref(), &label, &dir, opts.seed_offset))??;
    let summary = RunSummary {
        out_dir: dir.clone(),
        runs,
        certificates,
    };
    write(&dir.join("resolved.toml"), &cfg.to_toml())?;
    let json = json!({
        "command": "run",
        "config": cfg.to_toml(),
        "runs": summary.runs.iter().map(SeedOutcome::to_json).collect::<Vec<_>>(),
        "certificates": summary.certificates.iter().map(Certificate::to_json).collect::<Vec<_>>(),
        "success": summary.success(),
    });
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&json)?)?;
    Ok(summary)
}

/// A sweep axis such as `gamma=5,1,0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub param: String,
    pub values: Vec<f64>,
}

pub const SWEEP_PARAMS: [&str; 2] = ["gamma", "beta"];

pub fn parse_grid(specs: &[String]) -> anyhow::Result<Vec<GridAxis>> {
    if specs.is_empty() {
        bail!("empty grid: pass at least one --grid PARAM=V1,V2,...");
    }
    let mut axes: Vec<GridAxis> = Vec::new();
    for spec in specs {
        let (param, list) = spec
            .split_once('=')
            .with_context(|| format!("grid `{spec}` must look like PARAM=V1,V2,..."))?;
        let param = param.trim();
        if !SWEEP_PARAMS.contains(&param) {
            bail!("cannot sweep `{param}` (expected one of {SWEEP_PARAMS:?})");
        }
        if axes.iter().any(|a| a.param == param) {
            bail!("grid parameter `{param}` given twice");
        }
        let values = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<f64>().with_context(|| format!("grid value `{v}` for `{param}` is not a number")))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        if values.is_empty() {
            bail!("empty grid for `{param}`");
        }
        axes.push(GridAxis {
            param: param.to_string(),
            values,
        });
    }
    Ok(axes)
}

/// One grid point of a sweep, aggregated over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub gamma: f64,
    pub beta: f64,
    pub mean_final_f: f64,
    pub runs: Vec<SeedOutcome>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub out_dir: PathBuf,
    /// ranked by mean final `f`, incomplete points last
    pub entries: Vec<SweepEntry>,
}

impl SweepSummary {
    pub fn success(&self) -> bool {
        self.entries.iter().flat_map(|e| &e.runs).all(SeedOutcome::completed)
    }
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

/// `sweep <config> --grid ...`: the cross product of the axes times the seeds.
pub fn cmd_sweep(cfg: &ExperimentConfig, grid: &[GridAxis], opts: &GlobalOptions) -> anyhow::Result<SweepSummary> {
    if grid.is_empty() || grid.iter().any(|a| a.values.is_empty()) {
        bail!("empty grid");
    }
    let dir = opts.output_dir(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let problem = cfg.build_problem()?;

    let mut points: Vec<ExperimentConfig> = vec![cfg.clone()];
    for axis in grid {
        let mut next = Vec::new();
        for p in &points {
            for &v in &axis.values {
                let mut c = p.clone();
                match axis.param.as_str() {
                    "gamma" => c.method.gamma = v,
                    "beta" => c.method.beta = v,
                    other => bail!("cannot sweep `{other}`"),
                }
                c.resolve()?;
                next.push(c);
            }
        }
        points = next;
    }

    let entries: Vec<anyhow::Result<SweepEntry>> = opts.install(|| {
        points
            .par_iter()
            .map(|c| {
                let label = format!(
                    "{}_gamma{}_beta{}",
                    c.method.name,
                    format_value(c.method.gamma),
                    format_value(c.method.beta)
                );
                let (runs, _) = run_seeds(c, problem.as_ref(), &label, &dir, opts.seed_offset)?;
                let complete = runs.iter().all(SeedOutcome::completed);
                let mean = runs.iter().map(|r| r.final_f).sum::<f64>() / runs.len() as f64;
                Ok(SweepEntry {
                    label,
                    gamma: c.method.gamma,
                    beta: c.method.beta,
                    mean_final_f: if complete { mean } else { f64::INFINITY },
                    runs,
                })
            })
            .collect()
    })?;
    let mut entries = entries.into_iter().collect::<anyhow::Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.mean_final_f.total_cmp(&b.mean_final_f));

    let summary = SweepSummary { out_dir: dir.clone(), entries };
    write(&dir.join("resolved.toml"), &cfg.to_toml())?;
    let ranking: Vec<Value> = summary
        .entries
        .iter()
        .enumerate()
        .map(|(rank, e)| {
            json!({
                "rank": rank + 1,
                "label": e.label,
                "gamma": json_number(e.gamma),
                "beta": json_number(e.beta),
                "mean_final_f": json_number(e.mean_final_f),
                "runs": e.runs.iter().map(SeedOutcome::to_json).collect::<Vec<_>>(),
            })
        })
        .collect();
    let json = json!({
        "command": "sweep",
        "config": cfg.to_toml(),
        "grid": grid.iter().map(|a| json!({"param": a.param, "values": a.values.iter().map(|v| json_number(*v)).collect::<Vec<_>>()})).collect::<Vec<_>>(),
        "ranking": ranking,
        "success": summary.success(),
    });
    write(&dir.join("summary.json"), &serde_json::to_string_pretty(&json)?)?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct VerifySummary {
    pub report: PathBuf,
    pub suites: Vec<(String, Vec<Certificate>)>,
}

impl VerifySummary {
    pub fn success(&self) -> bool {
        self.suites.iter().flat_map(|(_, c)| c).all(Certificate::passed)
    }

    pub fn certificates(&self) -> impl Iterator<Item = &Certificate> {
        self.suites.iter().flat_map(|(_, c)| c)
    }
}

/// `verify <suite...>`: one line per certificate in `verify_report.txt` plus
/// `verify_summary.json`.
pub fn cmd_verify(suites: &[String], inject_fault: bool, opts: &GlobalOptions) -> anyhow::Result<VerifySummary> {
    let names = verify::resolve_suites(suites)?;
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let vopts = VerifyOptions {
        seed: opts.seed_offset,
        fault: inject_fault.then_some(FAULT_SHIFT),
    };
    let results = opts.install(|| verify::run_suites(&names, &vopts))??;
    let mut text = String::new();
    for (_, certs) in &results {
        for c in certs {
            text.push_str(&c.to_string());
            text.push('\n');
        }
    }
    let report = dir.join("verify_report.txt");
    write(&report, &text)?;
    let summary = VerifySummary { report, suites: results };
    let json = json!({
        "command": "verify",
        "fault_injected": inject_fault,
        "seed": opts.seed_offset,
        "suites": summary.suites.iter().map(|(name, certs)| json!({
            "suite": name,
            "passed": certs.iter().all(Certificate::passed),
            "certificates": certs.iter().map(Certificate::to_json).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "success": summary.success(),
    });
    write(&dir.join("verify_summary.json"), &serde_json::to_string_pretty(&json)?)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub mean_rating: f64,
}

/// `ingest-movielens <path>`: validates a `u.data` file and records its shape.
pub fn cmd_ingest(path: &Path, opts: &GlobalOptions) -> anyhow::Result<IngestSummary> {
    let a = load_movielens(path)?;
    let ratings = a.iter().filter(|v| **v != 0.0).count();
    let summary = IngestSummary {
        users: a.nrows(),
        items: a.ncols(),
        ratings,
        mean_rating: a.iter().filter(|v| **v != 0.0).sum::<f64>() / ratings as f64,
    };
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let json = json!({
        "command": "ingest-movielens",
        "path": path.display().to_string(),
        "users": summary.users,
        "items": summary.items,
        "ratings": summary.ratings,
        "mean_rating": json_number(summary.mean_rating),
    });
    write(&dir.join("movielens_summary.json"), &serde_json::to_string_pretty(&json)?)?;
    Ok(summary)
}
