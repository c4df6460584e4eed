//! Named certificate suites for the `verify` command.

use std::fmt;

use ndarray::{array, Array1};
use nlprec::analysis::{
    aniso_descent_residual, certify_conjugate_identity, certify_cosh_local_lower,
    certify_cosh_primal_majorization, certify_dual_upper, certify_fenchel_young,
    certify_inverse_map, certify_lyapunov_contraction, certify_min_stationarity,
    certify_noise_majorization, certify_precond_lipschitz, certify_scalar_cosh_majorization,
    certify_subconvexity, certify_subhomogeneity, check_sequence_lemma, gaussian_vector,
    gradient_variance_estimate, grad_dominance_residual, minibatch_bound, mixed_scale,
    momentum_linear_factor, momentum_lipschitz_bound, momentum_sublinear_bound,
    noise_level_estimate, slack, stochastic_bound, AnalysisError, CheckReport, Perturbed,
    RateCertificate, INEQUALITY_TOL,
};
use nlprec::kernels::{Kernel, ReferenceFunction, ScalarKernel, Shape};
use nlprec::optimizers::{run, Method, Record, RunConfig, RunError};
use nlprec::problems::{
    finite_diff_grad, relative_error, MatrixFactorization, Noiseless, Objective, PhaseRetrieval,
    Quadratic, SelfCalibratedCosh, StochasticOracle, TwoAtomQuadratic,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::json_number;

pub const SUITES: [&str; 13] = [
    "kernel-identities",
    "noise-majorization",
    "subhomogeneity",
    "dual-bounds",
    "aniso-descent",
    "precond-lipschitz",
    "momentum-sublinear",
    "momentum-linear",
    "momentum-lipschitz",
    "stochastic-rates",
    "sequence-lemma",
    "gradients",
    "grad-dominance",
];

/// Size of the perturbation applied to `h*′` by `--inject-fault`.
pub const FAULT_SHIFT: f64 = 1e-3;

const KERNELS: [Kernel; 4] = [
    Kernel::Quadratic,
    Kernel::Cosh,
    Kernel::LogBarrier { eps: 1.0 },
    Kernel::Circular,
];

const SHAPES: [Shape; 2] = [Shape::Isotropic, Shape::Separable];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite `{0}` (available: all, {list})", list = SUITES.join(", "))]
    UnknownSuite(String),
    #[error("no suites requested")]
    NoSuites,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Run(#[from] RunError),
}

/// Either a sampled check or a bound-versus-trace comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Check(CheckReport),
    Rate(RateCertificate),
}

impl Certificate {
    pub fn name(&self) -> &str {
        match self {
            Certificate::Check(c) => &c.name,
            Certificate::Rate(r) => &r.name,
        }
    }

    pub fn passed(&self) -> bool {
        match self {
            Certificate::Check(c) => c.passed(),
            Certificate::Rate(r) => r.satisfied,
        }
    }

    /// Worst residual or margin; negative beyond tolerance means violated.
    pub fn worst(&self) -> f64 {
        match self {
            Certificate::Check(c) => c.worst_residual,
            Certificate::Rate(r) => r.worst_margin(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Certificate::Check(c) => json!({
                "kind": "check",
                "name": c.name,
                "passed": c.passed(),
                "samples": c.samples,
                "worst_residual": json_number(c.worst_residual),
                "tolerance": json_number(c.tolerance),
                "violations": c.violations,
                "witnesses": c.witnesses,
                "precondition_failure": c.precondition_failure,
            }),
            Certificate::Rate(r) => json!({
                "kind": "rate",
                "name": r.name,
                "passed": r.satisfied,
                "points": r.bound_series.len(),
                "worst_margin": json_number(r.worst_margin()),
                "first_violation": r.first_violation(),
            }),
        }
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Certificate::Check(c) => c.fmt(f),
            Certificate::Rate(r) => r.fmt(f),
        }
    }
}

impl From<CheckReport> for Certificate {
    fn from(c: CheckReport) -> Self {
        Certificate::Check(c)
    }
}

impl From<RateCertificate> for Certificate {
    fn from(r: RateCertificate) -> Self {
        Certificate::Rate(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// shift added to every kernel's `h*′` in the kernel-identity suite
    pub fault: Option<f64>,
}

/// Expands `all` and rejects unknown names, keeping request order.
pub fn resolve_suites(names: &[String]) -> Result<Vec<&'static str>, VerifyError> {
    if names.is_empty() {
        return Err(VerifyError::NoSuites);
    }
    let mut out: Vec<&'static str> = Vec::new();
    for n in names {
        let add: Vec<&'static str> = if n == "all" {
            SUITES.to_vec()
        } else {
            vec![*SUITES
                .iter()
                .find(|s| **s == n.as_str())
                .ok_or_else(|| VerifyError::UnknownSuite(n.clone()))?]
        };
        for s in add {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

fn rng_for(opts: &VerifyOptions, suite: &str, part: u64) -> ChaCha8Rng {
    // FNV-1a keeps suite streams independent of request order
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in suite.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ h);
    rng.set_stream(part);
    rng
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<Vec<Certificate>, VerifyError> {
    match name {
        "kernel-identities" => Ok(kernel_identities(opts, 1000)),
        "noise-majorization" => noise_majorization(opts, 100_000),
        "subhomogeneity" => Ok(subhomogeneity(opts, 10_000)),
        "dual-bounds" => Ok(dual_bounds(opts, 10_000)),
        "aniso-descent" => Ok(aniso_descent(opts, 1000)),
        "precond-lipschitz" => Ok(precond_lipschitz(opts, 10_000)),
        "momentum-sublinear" => momentum_sublinear(10_000),
        "momentum-linear" => momentum_linear(1000),
        "momentum-lipschitz" => momentum_lipschitz(1000),
        "stochastic-rates" => stochastic_rates(opts, &StochasticSetup::default()),
        "sequence-lemma" => Ok(sequence_lemma(opts)),
        "gradients" => Ok(gradients(opts, 100)),
        "grad-dominance" => grad_dominance(opts, 10_000),
        other => Err(VerifyError::UnknownSuite(other.to_string())),
    }
}

/// Runs the suites in parallel; results come back in request order.
pub fn run_suites(names: &[&str], opts: &VerifyOptions) -> Result<Vec<(String, Vec<Certificate>)>, VerifyError> {
    names
        .par_iter()
        .map(|n| run_suite(n, opts).map(|c| (n.to_string(), c)))
        .collect()
}

fn scalar_kernel(k: Kernel, fault: Option<f64>) -> Box<dyn ScalarKernel> {
    match fault {
        Some(shift) => Box::new(Perturbed { inner: k, shift }),
        None => Box::new(k),
    }
}

/// Inverse map and Fenchel–Young on every kernel, plus the vector conjugate identity.
pub fn kernel_identities(opts: &VerifyOptions, samples: usize) -> Vec<Certificate> {
    let mut out = Vec::new();
    for (i, k) in KERNELS.iter().enumerate() {
        let kernel = scalar_kernel(*k, opts.fault);
        let mut rng = rng_for(opts, "kernel-identities", i as u64);
        out.push(certify_inverse_map(kernel.as_ref(), samples, &mut rng).into());
        out.push(certify_fenchel_young(kernel.as_ref(), samples, &mut rng).into());
        for shape in SHAPES {
            let report = match opts.fault {
                Some(shift) => {
                    let r = ReferenceFunction::new(Perturbed { inner: *k, shift }, shape, 1.0).expect("unit scale");
                    certify_conjugate_identity(&r, 3, samples, &mut rng)
                }
                None => {
                    let r = ReferenceFunction::new(*k, shape, 1.0).expect("unit scale");
                    certify_conjugate_identity(&r, 3, samples, &mut rng)
                }
            };
            out.push(report.into());
        }
    }
    out
}

/// Noise majorisation for unit cosh, both shapes, plus the scalar and primal forms.
pub fn noise_majorization(opts: &VerifyOptions, pairs: usize) -> Result<Vec<Certificate>, VerifyError> {
    let jobs: Vec<u64> = (0..4).collect();
    jobs.par_iter()
        .map(|&j| {
            let mut rng = rng_for(opts, "noise-majorization", j);
            Ok(match j {
                0 => certify_noise_majorization(&ReferenceFunction::isotropic(Kernel::Cosh), 3, pairs, &mut rng)?,
                1 => certify_noise_majorization(&ReferenceFunction::separable(Kernel::Cosh), 3, pairs, &mut rng)?,
                2 => certify_scalar_cosh_majorization(pairs, &mut rng),
                _ => certify_cosh_primal_majorization(3, pairs, &mut rng),
            }
            .into())
        })
        .collect()
}

/// 2-subhomogeneity grids for the non-quadratic kernels and sampled subconvexity.
pub fn subhomogeneity(opts: &VerifyOptions, samples: usize) -> Vec<Certificate> {
    let mut out: Vec<Certificate> = KERNELS[1..]
        .iter()
        .map(|k| certify_subhomogeneity(k).into())
        .collect();
    let mut part = 0;
    for k in KERNELS {
        for shape in SHAPES {
            let r = ReferenceFunction::new(k, shape, 1.0).expect("unit scale");
            for scaled in [false, true] {
                let mut rng = rng_for(opts, "subhomogeneity", part);
                part += 1;
                out.push(certify_subconvexity(&r, 3, samples, scaled, &mut rng).into());
            }
        }
    }
    out
}

/// Dual upper bound `‖y‖²/(2μ_φ)` per kernel and the local cosh lower bound.
pub fn dual_bounds(opts: &VerifyOptions, samples: usize) -> Vec<Certificate> {
    let mut out = Vec::new();
    let mut part = 0;
    for k in KERNELS {
        for shape in SHAPES {
            let r = ReferenceFunction::new(k, shape, 1.0).expect("unit scale");
            let mut rng = rng_for(opts, "dual-bounds", part);
            part += 1;
            out.push(certify_dual_upper(&r, 3, samples, &mut rng).into());
        }
    }
    let mut rng = rng_for(opts, "dual-bounds", part);
    out.push(certify_cosh_local_lower(3, samples, &mut rng).into());
    out
}

/// Anisotropic descent on the self-calibrated cosh problem: an identity at
/// `L = 1` and an inequality at `L = 2` on the same pairs.
pub fn aniso_descent(opts: &VerifyOptions, pairs: usize) -> Vec<Certificate> {
    let r = ReferenceFunction::isotropic(Kernel::Cosh);
    let mut out = Vec::new();
    for dim in [1usize, 2, 5] {
        let p = SelfCalibratedCosh::new(dim).expect("positive dimension");
        let mut rng = rng_for(opts, "aniso-descent", dim as u64);
        let mut equality = CheckReport::new(format!("aniso-descent-equality/dim={dim}/L=1"), INEQUALITY_TOL);
        let mut relaxed = CheckReport::new(format!("aniso-descent/dim={dim}/L=2"), INEQUALITY_TOL);
        for _ in 0..pairs {
            let (sx, sb) = (mixed_scale(&mut rng).min(3.0), mixed_scale(&mut rng).min(3.0));
            let x = gaussian_vector(&mut rng, dim, sx);
            let xbar = gaussian_vector(&mut rng, dim, sb);
            let witness = || format!("x={x} xbar={xbar}");
            equality.record(-aniso_descent_residual(&p, &r, 1.0, &x, &xbar).abs(), witness);
            relaxed.record(aniso_descent_residual(&p, &r, 2.0, &x, &xbar), witness);
        }
        out.push(equality.into());
        out.push(relaxed.into());
    }
    out
}

/// Lipschitz continuity of the preconditioned gradient map.
pub fn precond_lipschitz(opts: &VerifyOptions, pairs: usize) -> Vec<Certificate> {
    let p = SelfCalibratedCosh::new(1).expect("positive dimension");
    let mut rng = rng_for(opts, "precond-lipschitz", 0);
    let barrier = ReferenceFunction::isotropic(Kernel::LogBarrier { eps: 1.0 });
    let mut a = certify_precond_lipschitz(&p, &barrier, 1.0, pairs, &mut rng);
    a.name = format!("{}/log_barrier", a.name);
    let p3 = SelfCalibratedCosh::new(3).expect("positive dimension");
    let mut b = certify_precond_lipschitz(&p3, &ReferenceFunction::isotropic(Kernel::Cosh), 1.0, pairs, &mut rng);
    b.name = format!("{}/cosh", b.name);
    vec![a.into(), b.into()]
}

/// Dominance residual for the self-calibrated cosh problem, where it is an identity.
pub fn grad_dominance(opts: &VerifyOptions, samples: usize) -> Result<Vec<Certificate>, VerifyError> {
    let r = ReferenceFunction::isotropic(Kernel::Cosh);
    let mut out = Vec::new();
    for dim in [1usize, 3] {
        let p = SelfCalibratedCosh::new(dim).expect("positive dimension");
        let mut rng = rng_for(opts, "grad-dominance", dim as u64);
        let mut report = CheckReport::new(format!("grad-dominance/selfcal_cosh/dim={dim}"), INEQUALITY_TOL);
        for _ in 0..samples {
            let s = mixed_scale(&mut rng);
            let x = gaussian_vector(&mut rng, dim, s);
            let res = grad_dominance_residual(&p, &r, 1.0, &x)?;
            report.record(res, || format!("x={x}"));
        }
        out.push(report.into());
    }
    Ok(out)
}

/// Two-dimensional start of norm 3 used by the deterministic momentum suites.
pub fn momentum_start() -> Array1<f64> {
    let c = 3.0 / 2f64.sqrt();
    array![c, c]
}

fn selfcal_run(method: Method, gamma: f64, beta: f64, iterations: usize) -> Result<Vec<Record>, VerifyError> {
    let p = Noiseless(SelfCalibratedCosh::new(2).expect("positive dimension"));
    let cfg = RunConfig::new(method, gamma, iterations).with_beta(beta);
    let trace = run(&p, &ReferenceFunction::isotropic(Kernel::Cosh), &cfg, momentum_start(), 0)?;
    Ok(trace.records)
}

/// Min-stationarity bound of the momentum method for `β ∈ [0, ½)`, `γ = α/L`.
pub fn certify_momentum_sublinear(
    name: &str,
    records: &[Record],
    l: f64,
    gamma: f64,
    beta: f64,
    f_star: f64,
) -> Result<RateCertificate, VerifyError> {
    let gap = records[0].f - f_star;
    let alpha = gamma * l;
    momentum_sublinear_bound(l, gap, alpha, beta, 0)?;
    Ok(certify_min_stationarity(name, records, |k| {
        momentum_sublinear_bound(l, gap, alpha, beta, k).expect("validated")
    }))
}

/// Linear rate and Lyapunov contraction of the momentum method under gradient dominance.
pub fn certify_momentum_linear(
    name: &str,
    records: &[Record],
    gamma: f64,
    beta: f64,
    mu: f64,
    f_star: f64,
) -> Result<Vec<RateCertificate>, VerifyError> {
    let factor = momentum_linear_factor(beta, gamma, mu)?;
    Ok(vec![
        nlprec::analysis::certify_linear_rate(&format!("{name}/rate"), records, f_star, factor),
        certify_lyapunov_contraction(&format!("{name}/lyapunov"), records, factor),
    ])
}

pub fn momentum_sublinear(iterations: usize) -> Result<Vec<Certificate>, VerifyError> {
    let grid: Vec<(f64, f64)> = [0.0, 0.1, 0.25, 0.4]
        .iter()
        .flat_map(|&b| [0.5, 1.0].map(|a| (b, a)))
        .collect();
    grid.par_iter()
        .map(|&(beta, alpha)| {
            let records = selfcal_run(Method::Mnpgm, alpha, beta, iterations)?;
            let name = format!("momentum-sublinear/beta={beta}/alpha={alpha}");
            Ok(certify_momentum_sublinear(&name, &records, 1.0, alpha, beta, 0.0)?.into())
        })
        .collect()
}

pub fn momentum_linear(iterations: usize) -> Result<Vec<Certificate>, VerifyError> {
    let grid: Vec<(f64, f64)> = [0.1, 0.25, 0.4]
        .iter()
        .flat_map(|&b| [0.5, 1.0].map(|g| (b, g)))
        .collect();
    let nested: Result<Vec<Vec<Certificate>>, VerifyError> = grid
        .par_iter()
        .map(|&(beta, gamma)| {
            let records = selfcal_run(Method::Mnpgm, gamma, beta, iterations)?;
            let name = format!("momentum-linear/beta={beta}/gamma={gamma}");
            Ok(certify_momentum_linear(&name, &records, gamma, beta, 1.0, 0.0)?
                .into_iter()
                .map(Certificate::from)
                .collect())
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// Momentum bound under a Lipschitz preconditioned gradient, `γ = (1-β)²/L`.
pub fn momentum_lipschitz(iterations: usize) -> Result<Vec<Certificate>, VerifyError> {
    let r = ReferenceFunction::isotropic(Kernel::Cosh);
    let p = SelfCalibratedCosh::new(2).expect("positive dimension");
    let x0 = momentum_start();
    let phi_u0 = r.stationarity(&p.gradient(&x0));
    [0.1, 0.25, 0.5, 0.75, 0.9]
        .par_iter()
        .map(|&beta| {
            let gamma = (1.0 - beta) * (1.0 - beta);
            let records = selfcal_run(Method::Mnpgm, gamma, beta, iterations)?;
            let gap = records[0].f;
            momentum_lipschitz_bound(gap, beta, gamma, phi_u0, 1)?;
            Ok(certify_min_stationarity(&format!("momentum-lipschitz/beta={beta}"), &records[1..], |k| {
                momentum_lipschitz_bound(gap, beta, gamma, phi_u0, k).expect("validated")
            })
            .into())
        })
        .collect()
}

/// Parameters of the stochastic certificates on the two-atom problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSetup {
    pub gamma: f64,
    pub x0: f64,
    pub iterations: usize,
    pub seeds: u64,
    /// Monte-Carlo draws per grid point for the noise level
    pub noise_draws: usize,
    /// grid points across the visited interval
    pub grid_points: usize,
}

impl Default for StochasticSetup {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            x0: 3.0,
            iterations: 1000,
            seeds: 30,
            noise_draws: 10_000,
            grid_points: 81,
        }
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Seeded stochastic runs at the given batch, logged every iteration.
fn two_atom_runs(setup: &StochasticSetup, batch: usize, seed_base: u64) -> Result<Vec<Vec<Record>>, VerifyError> {
    let p = TwoAtomQuadratic::new();
    let r = ReferenceFunction::isotropic(Kernel::Cosh);
    let cfg = RunConfig::new(Method::Snpgm, setup.gamma, setup.iterations)
        .with_batch(batch)
        .with_eval_every(1);
    (0..setup.seeds)
        .into_par_iter()
        .map(|s| Ok(run(&p, &r, &cfg, array![setup.x0], seed_base + s)?.records))
        .collect()
}

/// Symmetric interval about the minimiser `-1` containing every visited iterate,
/// recovered from `f = 3 + 1.5(x+1)²`.
fn visited_radius(runs: &[Vec<Record>]) -> f64 {
    runs.iter()
        .flatten()
        .map(|r| ((r.f - 3.0).max(0.0) / 1.5).sqrt())
        .fold(0.0, f64::max)
}

fn interval_grid(radius: f64, points: usize) -> Vec<Array1<f64>> {
    (0..points)
        .map(|i| array![-1.0 - radius + 2.0 * radius * i as f64 / (points - 1) as f64])
        .collect()
}

/// Trajectory-average, minibatch and linear-envelope certificates on the
/// two-atom problem with the cosh reference, estimated over seeds with a
/// three-standard-error cushion.
pub fn stochastic_rates(opts: &VerifyOptions, setup: &StochasticSetup) -> Result<Vec<Certificate>, VerifyError> {
    let p = TwoAtomQuadratic::new();
    let r = ReferenceFunction::isotropic(Kernel::Cosh);
    let f_star = 3.0;
    let gap = p.value(&array![setup.x0]) - f_star;
    let k = setup.iterations;
    let mut out: Vec<Certificate> = Vec::new();

    // batch 1: average stationarity and linear envelope
    let runs = two_atom_runs(setup, 1, opts.seed)?;
    let radius = visited_radius(&runs);
    let grid = interval_grid(radius, setup.grid_points);
    let mut rng = rng_for(opts, "stochastic-rates", 0);
    let noise = noise_level_estimate(&p, &r, &grid, 1, setup.noise_draws, &mut rng);
    let sigma2 = noise.sigma2 + 3.0 * noise.standard_error;

    let averages: Vec<f64> = runs
        .iter()
        .map(|rec| rec[..k].iter().map(|x| x.stationarity).sum::<f64>() / k as f64)
        .collect();
    let (avg, se) = mean_and_se(&averages);
    let bound = stochastic_bound(gap, setup.gamma, k, sigma2)? + 3.0 * se;
    out.push(RateCertificate::new("stochastic-average/batch=1", &[k], &[bound], &[avg]).into());

    let mut mu = f64::INFINITY;
    for rec in runs.iter().flatten() {
        let sub = rec.f - f_star;
        if sub > 1e-12 {
            mu = mu.min(rec.stationarity / sub);
        }
    }
    let mut ks = Vec::with_capacity(k + 1);
    let mut bounds = Vec::with_capacity(k + 1);
    let mut observed = Vec::with_capacity(k + 1);
    for i in 0..=k {
        let subs: Vec<f64> = runs.iter().map(|rec| rec[i].f - f_star).collect();
        let (m, se) = mean_and_se(&subs);
        ks.push(runs[0][i].k);
        observed.push(m);
        bounds.push(nlprec::analysis::stochastic_linear_bound(gap, setup.gamma, mu, sigma2, i)? + 3.0 * se);
    }
    out.push(RateCertificate::new(format!("stochastic-linear/mu={mu:.4}"), &ks, &bounds, &observed).into());

    // batch K: the variance premise σ²/K is checked on the visited region
    let big = two_atom_runs(setup, k, opts.seed + setup.seeds)?;
    let radius_k = visited_radius(&big);
    let sigma2_atoms = (4.0 + radius_k).powi(2);
    let premise_grid = interval_grid(radius_k, 21);
    let draws = 400;
    let mut rng = rng_for(opts, "stochastic-rates", 1);
    let var = gradient_variance_estimate(&p, &premise_grid, k, draws, &mut rng);
    let allowed = sigma2_atoms / k as f64 * (1.0 + 3.0 * (2.0 / draws as f64).sqrt());
    let mut premise = CheckReport::new("minibatch-variance-premise", INEQUALITY_TOL);
    premise.record(slack(var, allowed), || format!("variance={var} allowed={allowed}"));
    out.push(premise.into());

    let averages: Vec<f64> = big
        .iter()
        .map(|rec| rec[..k].iter().map(|x| x.stationarity).sum::<f64>() / k as f64)
        .collect();
    let (avg, se) = mean_and_se(&averages);
    let bound = minibatch_bound(gap, setup.gamma, k, sigma2_atoms)? + 3.0 * se;
    out.push(RateCertificate::new(format!("stochastic-average/batch={k}"), &[k], &[bound], &[avg]).into());
    Ok(out)
}

/// Sequence lemma on its fixed point, the `α = 1` case and random admissible sequences.
pub fn sequence_lemma(opts: &VerifyOptions) -> Vec<Certificate> {
    let mut out: Vec<Certificate> = Vec::new();
    let mut fixed = check_sequence_lemma(&[2.0; 50], 0.25, 0.5);
    fixed.name = "sequence-lemma/fixed-point".into();
    out.push(fixed.into());

    let theta = 0.3;
    let mut tight = vec![theta; 51];
    tight[0] = 5.0;
    let mut report = check_sequence_lemma(&tight, 1.0, theta);
    report.name = "sequence-lemma/alpha=1".into();
    out.push(report.into());

    let mut rng = rng_for(opts, "sequence-lemma", 0);
    let mut random = CheckReport::new("sequence-lemma/random", INEQUALITY_TOL);
    for _ in 0..1000 {
        let alpha: f64 = rng.random_range(0.01..1.99);
        let theta: f64 = rng.random_range(0.01..10.0);
        // for α > 1 the recursion stays nonnegative only below θ/(α-1)
        let top = if alpha > 1.0 { (theta / (alpha - 1.0)).min(100.0) } else { 100.0 };
        let mut delta = vec![top * rng.random::<f64>()];
        for _ in 0..100 {
            let cap = (1.0 - alpha) * delta.last().unwrap() + theta;
            delta.push(cap * rng.random::<f64>());
        }
        let r = check_sequence_lemma(&delta, alpha, theta);
        if let Some(reason) = &r.precondition_failure {
            random.precondition_failure = Some(reason.clone());
        }
        random.merge(r);
    }
    out.push(random.into());
    out
}

fn gradient_check(name: &str, problem: &dyn StochasticOracle, points: usize, rng: &mut dyn RngCore) -> CheckReport {
    let tol = 1e-5;
    let mut report = CheckReport::new(format!("gradient/{name}"), 0.0);
    for _ in 0..points {
        let x = problem.initial_point(rng, 1.0);
        let err = relative_error(&problem.gradient(&x), &finite_diff_grad(problem, &x, 1e-5));
        report.record(tol - err, || format!("relative_error={err:e}"));
    }
    report
}

/// Analytic gradients against central differences on every problem.
pub fn gradients(opts: &VerifyOptions, points: usize) -> Vec<Certificate> {
    let problems: Vec<(&str, Box<dyn StochasticOracle>)> = vec![
        ("quadratic", Box::new(Noiseless(Quadratic::new(5).expect("dim")))),
        ("selfcal_cosh", Box::new(Noiseless(SelfCalibratedCosh::new(5).expect("dim")))),
        ("two_atom_quadratic", Box::new(TwoAtomQuadratic::new())),
        (
            "matrix_factorization",
            Box::new(Noiseless(
                MatrixFactorization::new(MatrixFactorization::gaussian_target(12, 9, 1.0, 7), 3).expect("rank"),
            )),
        ),
        ("phase_retrieval", Box::new(PhaseRetrieval::generate(50, 20, 7).expect("sizes"))),
    ];
    problems
        .iter()
        .enumerate()
        .map(|(i, (name, p))| {
            let mut rng = rng_for(opts, "gradients", i as u64);
            gradient_check(name, p.as_ref(), points, &mut rng).into()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_resolution() {
        let all = resolve_suites(&["all".into()]).unwrap();
        assert_eq!(all.len(), SUITES.len());
        let two = resolve_suites(&["gradients".into(), "kernel-identities".into(), "gradients".into()]).unwrap();
        assert_eq!(two, vec!["gradients", "kernel-identities"]);
        assert!(matches!(resolve_suites(&["bogus".into()]), Err(VerifyError::UnknownSuite(_))));
        assert!(matches!(resolve_suites(&[]), Err(VerifyError::NoSuites)));
    }

    #[test]
    fn injected_fault_breaks_inverse_map() {
        let clean = kernel_identities(&VerifyOptions::default(), 200);
        assert!(clean.iter().all(Certificate::passed));
        let faulty = kernel_identities(&VerifyOptions { seed: 0, fault: Some(FAULT_SHIFT) }, 200);
        let inverse: Vec<&Certificate> = faulty.iter().filter(|c| c.name().starts_with("inverse-map")).collect();
        assert_eq!(inverse.len(), 4);
        for c in inverse {
            assert!(!c.passed());
            match c {
                Certificate::Check(r) => assert!(!r.witnesses.is_empty()),
                Certificate::Rate(_) => unreachable!(),
            }
        }
    }

    #[test]
    fn sequence_lemma_suite_passes() {
        for c in sequence_lemma(&VerifyOptions::default()) {
            assert!(c.passed(), "{c}");
        }
    }
}
