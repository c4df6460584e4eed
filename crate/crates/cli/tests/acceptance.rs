//! Acceptance criteria: each test prints one PASS/FAIL line and asserts it.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nlprec_cli::commands::{cmd_run, GlobalOptions, RunSummary};
use nlprec_cli::config::ExperimentConfig;
use nlprec_cli::verify::{self, Certificate, StochasticSetup, VerifyOptions};
use tempfile::TempDir;

fn report(id: u32, what: &str, ok: bool, detail: &str) {
    println!("[{id:>2}] {} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
}

/// Prints the line for a suite and fails the test on any failed certificate or overrun.
fn check_suite(id: u32, what: &str, certs: &[Certificate], elapsed: Duration, limit: Option<Duration>) {
    let failed: Vec<String> = certs.iter().filter(|c| !c.passed()).map(|c| c.to_string()).collect();
    let in_time = limit.is_none_or(|l| elapsed < l);
    let worst = certs.iter().map(Certificate::worst).fold(f64::INFINITY, f64::min);
    let mut detail = format!("{} certificates, worst margin {worst:.3e}, {:.2?}", certs.len(), elapsed);
    if let Some(l) = limit {
        detail.push_str(&format!(" (limit {l:?})"));
    }
    report(id, what, failed.is_empty() && in_time, &detail);
    assert!(failed.is_empty(), "{}", failed.join("\n"));
    assert!(in_time, "{what} took {elapsed:?}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn opts() -> VerifyOptions {
    VerifyOptions::default()
}

#[test]
fn kernel_identities() {
    let (certs, t) = timed(|| verify::kernel_identities(&opts(), 1000));
    let inverse_and_fy: Vec<Certificate> = certs
        .into_iter()
        .filter(|c| c.name().starts_with("inverse-map") || c.name().starts_with("fenchel-young"))
        .collect();
    assert_eq!(inverse_and_fy.len(), 8);
    for c in &inverse_and_fy {
        if let Certificate::Check(r) = c {
            assert_eq!(r.tolerance, 1e-10);
        }
    }
    check_suite(1, "kernel inverse map and Fenchel-Young", &inverse_and_fy, t, Some(Duration::from_secs(1)));
}

#[test]
fn noise_majorization() {
    let (certs, t) = timed(|| verify::noise_majorization(&opts(), 100_000).unwrap());
    for c in &certs {
        if let Certificate::Check(r) = c {
            assert!(r.samples >= 100_000);
            assert_eq!(r.tolerance, 1e-12);
        }
    }
    check_suite(2, "cosh noise majorization (both shapes, tighter form)", &certs, t, Some(Duration::from_secs(10)));
}

#[test]
fn subhomogeneity_and_subconvexity() {
    let (certs, t) = timed(|| verify::subhomogeneity(&opts(), 10_000));
    assert_eq!(certs.iter().filter(|c| c.name().starts_with("subhomogeneity")).count(), 3);
    check_suite(3, "2-subhomogeneity grid and subconvexity", &certs, t, Some(Duration::from_secs(5)));
}

#[test]
fn dual_upper_and_cosh_local_lower_bounds() {
    let (certs, t) = timed(|| verify::dual_bounds(&opts(), 10_000));
    check_suite(4, "dual upper bound and cosh local lower bound", &certs, t, None);
}

#[test]
fn anisotropic_descent_identity_and_monotonicity() {
    let (certs, t) = timed(|| verify::aniso_descent(&opts(), 1000));
    assert_eq!(certs.len(), 6);
    check_suite(5, "anisotropic descent equality at L=1, inequality at L=2", &certs, t, None);
}

#[test]
fn preconditioned_gradient_lipschitz() {
    let (certs, t) = timed(|| verify::precond_lipschitz(&opts(), 10_000));
    check_suite(6, "Lipschitz preconditioned gradient", &certs, t, None);
}

#[test]
fn momentum_sublinear_rate() {
    let (certs, t) = timed(|| verify::momentum_sublinear(10_000).unwrap());
    assert_eq!(certs.len(), 8);
    for c in &certs {
        if let Certificate::Rate(r) = c {
            assert_eq!(r.bound_series.len(), 10_001);
        }
    }
    check_suite(7, "momentum min-stationarity bound, K <= 1e4", &certs, t, Some(Duration::from_secs(30)));
}

#[test]
fn momentum_linear_rate_and_lyapunov() {
    let (certs, t) = timed(|| verify::momentum_linear(1000).unwrap());
    assert_eq!(certs.len(), 12);
    check_suite(8, "momentum linear rate and Lyapunov contraction", &certs, t, None);
}

#[test]
fn stochastic_rates() {
    let setup = StochasticSetup::default();
    assert_eq!((setup.seeds, setup.iterations, setup.gamma), (30, 1000, 0.1));
    let (certs, t) = timed(|| verify::stochastic_rates(&opts(), &setup).unwrap());
    assert_eq!(certs.len(), 4);
    check_suite(9, "stochastic average, minibatch and linear envelope", &certs, t, None);
}

fn write_config(dir: &Path, name: &str, body: &str) -> ExperimentConfig {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

fn run_in(cfg: &ExperimentConfig) -> RunSummary {
    cmd_run(cfg, &GlobalOptions::default()).unwrap()
}

fn mf_config(out: &Path, method: &str, gamma: f64, reference: &str) -> String {
    format!(
        r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
output_dir = "{}"

[problem]
name = "matrix_factorization"
rank = 10
rows = 100
cols = 80
data_seed = 2024

[method]
name = "{method}"
gamma = {gamma:e}
beta = 0.9
iterations = 1000
eval_every = 50

[reference]
{reference}
"#,
        out.display()
    )
}

#[test]
fn matrix_factorization_ordering() {
    let tmp = TempDir::new().unwrap();
    let start = Instant::now();
    let hgd = write_config(
        tmp.path(),
        "ihgdm.toml",
        &mf_config(&tmp.path().join("ihgdm"), "mnpgm", 2.0, "kernel = \"cosh\"\nshape = \"isotropic\"\nscale = 100.0"),
    );
    let gdm = write_config(
        tmp.path(),
        "gdm.toml",
        &mf_config(&tmp.path().join("gdm"), "gdm", 1.0 / 300.0, "kernel = \"quadratic\""),
    );
    let a = run_in(&hgd);
    let b = run_in(&gdm);
    let elapsed = start.elapsed();
    assert!(a.success() && b.success());
    let mut worst_ratio: f64 = 0.0;
    let mut wins = 0;
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(x.seed, y.seed);
        worst_ratio = worst_ratio.max(x.final_f / y.final_f);
        if x.final_f <= y.final_f {
            wins += 1;
        }
    }
    let ok = wins == 10 && elapsed < Duration::from_secs(120);
    report(
        10,
        "matrix factorization: preconditioned momentum final loss <= GDm",
        ok,
        &format!("{wins}/10 seeds, worst ratio {worst_ratio:.4}, {elapsed:.2?} (limit 120s)"),
    );
    assert_eq!(wins, 10);
    assert!(elapsed < Duration::from_secs(120));
}

fn pr_config(out: &Path, method: &str, gamma: f64, shape: &str, extra: &str) -> String {
    format!(
        r#"seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
output_dir = "{}"

[problem]
name = "phase_retrieval"
n = 200
m = 60
data_seed = 500

[method]
name = "{method}"
gamma = {gamma:e}
batch = 50
iterations = 1000
{extra}

[reference]
kernel = "cosh"
shape = "{shape}"
scale = 1000.0
"#,
        out.display()
    )
}

fn decrease(summary: &RunSummary, dir: &Path) -> Vec<f64> {
    summary
        .runs
        .iter()
        .map(|r| {
            let csv = fs::read_to_string(dir.join(r.csv.file_name().unwrap())).unwrap();
            let f0: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
            f0 / r.final_f
        })
        .collect()
}

#[test]
fn phase_retrieval_stochastic_runs() {
    let tmp = TempDir::new().unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, gamma, shape) in [("iso", 1.0 / 45.0, "isotropic"), ("sep", 1.0 / 44.0, "separable")] {
        let dir = tmp.path().join(label);
        let cfg = write_config(tmp.path(), &format!("{label}.toml"), &pr_config(&dir, "snpgm", gamma, shape, ""));
        let s = run_in(&cfg);
        let finite = s.success() && s.runs.iter().all(|r| r.final_f.is_finite());
        let dec = decrease(&s, &dir);
        let least = dec.iter().copied().fold(f64::INFINITY, f64::min);
        ok &= finite && least >= 10.0;
        detail.push(format!("{label}: finite={finite} min decrease {least:.3e}x"));
    }
    let mut clipped = Vec::new();
    for j in 0..=5 {
        let eta = 0.000023 * 10f64.powi(j);
        let dir = tmp.path().join(format!("clip{j}"));
        let cfg = write_config(
            tmp.path(),
            &format!("clip{j}.toml"),
            &pr_config(&dir, "clipped", 1.0, "isotropic", &format!("eta = {eta:e}")),
        );
        let s = run_in(&cfg);
        let finite = s.success() && s.runs.iter().all(|r| r.final_f.is_finite());
        let dec = decrease(&s, &dir);
        let mean = dec.iter().sum::<f64>() / dec.len() as f64;
        ok &= finite;
        clipped.push(format!("eta={eta:.1e}:{mean:.3e}x"));
    }
    detail.push(format!("clipped sweep (all finite) mean decrease {}", clipped.join(" ")));
    report(11, "phase retrieval: finite, >= 10x decrease; clipped sweep runs", ok, &detail.join("; "));
    assert!(ok, "{}", detail.join("\n"));
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let (certs, t) = timed(|| verify::gradients(&opts(), 100));
    assert_eq!(certs.len(), 5);
    check_suite(12, "analytic vs central-difference gradients (rel err <= 1e-5)", &certs, t, None);
}

#[test]
fn identical_config_and_seed_give_identical_csvs() {
    let tmp = TempDir::new().unwrap();
    let body = |out: &Path| {
        pr_config(out, "snpgm", 1.0 / 45.0, "isotropic", "")
            .replace("seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]", "seeds = [0, 1, 2]")
            .replace("iterations = 1000", "iterations = 300")
    };
    let runs: Vec<RunSummary> = ["a", "b"]
        .iter()
        .map(|d| run_in(&write_config(tmp.path(), &format!("{d}.toml"), &body(&tmp.path().join(d)))))
        .collect();
    let mut identical = 0;
    for (x, y) in runs[0].runs.iter().zip(&runs[1].runs) {
        if fs::read(&x.csv).unwrap() == fs::read(&y.csv).unwrap() {
            identical += 1;
        }
    }
    let ok = identical == 3;
    report(13, "determinism: repeated runs give byte-identical CSVs", ok, &format!("{identical}/3 seeds identical"));
    assert!(ok);
}
