//! Numerical certificates for the descent inequalities, noise bounds and rate
//! formulas behind the methods.
//!
//! Pointwise residuals are `RHS - LHS` divided by `max(1, |LHS|, |RHS|)`, so a
//! certificate tolerance is relative for large values and absolute near zero.
//! Equalities report `-|LHS - RHS|` with the same normalisation.

use std::fmt;

use ndarray::Array1;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::kernels::{Kernel, ReferenceFunction, ScalarKernel, Shape};
use crate::linalg::{distance, norm};
use crate::optimizers::Record;
use crate::problems::{Objective, StochasticOracle};

/// Slack allowed on inequality certificates.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Slack allowed between an observed series and its bound.
pub const RATE_TOL: f64 = 1e-9;
const MAX_WITNESSES: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{0} requires a cosh reference with scale 1")]
    UnsupportedReference(&'static str),
    #[error("the problem has no known optimal value")]
    UnknownOptimum,
    #[error("parameter {name} = {value} outside {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("weights and points differ in length or weights sum above 1")]
    InvalidCombination,
}

fn param(name: &'static str, value: f64, range: &'static str, ok: bool) -> Result<(), AnalysisError> {
    if ok {
        Ok(())
    } else {
        Err(AnalysisError::Parameter { name, value, range })
    }
}

fn scale_of(lhs: f64, rhs: f64) -> f64 {
    1f64.max(lhs.abs()).max(rhs.abs())
}

/// Normalised slack of `lhs ≤ rhs`.
pub fn slack(lhs: f64, rhs: f64) -> f64 {
    if lhs.is_nan() || rhs.is_nan() {
        return f64::NAN;
    }
    if rhs == f64::INFINITY && lhs.is_finite() {
        return f64::INFINITY;
    }
    (rhs - lhs) / scale_of(lhs, rhs)
}

/// Normalised `-|lhs - rhs|`.
pub fn equality_residual(lhs: f64, rhs: f64) -> f64 {
    -(lhs - rhs).abs() / scale_of(lhs, rhs)
}

/// Aggregate of a sampled certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub samples: usize,
    /// minimum residual seen; negative beyond `tolerance` means violated
    pub worst_residual: f64,
    pub violations: usize,
    /// first few violating inputs
    pub witnesses: Vec<String>,
    pub tolerance: f64,
    /// set when the inputs did not satisfy the certificate's premise
    pub precondition_failure: Option<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            samples: 0,
            worst_residual: f64::INFINITY,
            violations: 0,
            witnesses: Vec::new(),
            tolerance,
            precondition_failure: None,
        }
    }

    /// Adds one sample; `witness` is only rendered for violations.
    pub fn record(&mut self, residual: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if residual.is_nan() || residual < self.worst_residual {
            self.worst_residual = if residual.is_nan() { f64::NEG_INFINITY } else { residual };
        }
        if residual.is_nan() || residual < -self.tolerance {
            self.violations += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(format!("{} (residual {residual:e})", witness()));
            }
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.samples += other.samples;
        self.worst_residual = self.worst_residual.min(other.worst_residual);
        self.violations += other.violations;
        let room = MAX_WITNESSES.saturating_sub(self.witnesses.len());
        self.witnesses.extend(other.witnesses.into_iter().take(room));
        if self.precondition_failure.is_none() {
            self.precondition_failure = other.precondition_failure;
        }
    }

    pub fn passed(&self) -> bool {
        self.precondition_failure.is_none() && self.violations == 0 && self.samples > 0
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} samples={} worst_residual={:.6e} violations={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.samples,
            self.worst_residual,
            self.violations
        )?;
        if let Some(reason) = &self.precondition_failure {
            write!(f, " precondition: {reason}")?;
        }
        for w in &self.witnesses {
            write!(f, "\n    witness: {w}")?;
        }
        Ok(())
    }
}

/// Observed series against a bound, indexed by iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCertificate {
    pub name: String,
    pub bound_series: Vec<(usize, f64)>,
    pub observed_series: Vec<(usize, f64)>,
    pub satisfied: bool,
}

impl RateCertificate {
    pub fn new(name: impl Into<String>, ks: &[usize], bound: &[f64], observed: &[f64]) -> Self {
        assert_eq!(ks.len(), bound.len());
        assert_eq!(ks.len(), observed.len());
        let satisfied = bound
            .iter()
            .zip(observed)
            .all(|(b, o)| o.is_finite() && *o <= b + RATE_TOL);
        Self {
            name: name.into(),
            bound_series: ks.iter().copied().zip(bound.iter().copied()).collect(),
            observed_series: ks.iter().copied().zip(observed.iter().copied()).collect(),
            satisfied,
        }
    }

    /// Smallest `bound - observed` over the series.
    pub fn worst_margin(&self) -> f64 {
        self.bound_series
            .iter()
            .zip(&self.observed_series)
            .map(|((_, b), (_, o))| b - o)
            .fold(f64::INFINITY, f64::min)
    }

    /// First iteration at which the bound is exceeded.
    pub fn first_violation(&self) -> Option<usize> {
        self.bound_series
            .iter()
            .zip(&self.observed_series)
            .find(|((_, b), (_, o))| !(o.is_finite() && *o <= b + RATE_TOL))
            .map(|((k, _), _)| *k)
    }
}

impl fmt::Display for RateCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} points={} worst_margin={:.6e}",
            if self.satisfied { "PASS" } else { "FAIL" },
            self.name,
            self.bound_series.len(),
            self.worst_margin()
        )?;
        if let Some(k) = self.first_violation() {
            write!(f, " first_violation_k={k}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// pointwise residuals

/// `|h*'(h'(t)) - t|`, negated.
pub fn inverse_map_residual<K: ScalarKernel + ?Sized>(kernel: &K, t: f64) -> f64 {
    -(kernel.conj_deriv(kernel.deriv(t)) - t).abs()
}

/// Fenchel–Young equality `h(t) + h*(h'(t)) = t h'(t)`.
pub fn fenchel_young_equality_residual<K: ScalarKernel + ?Sized>(kernel: &K, t: f64) -> f64 {
    let s = kernel.deriv(t);
    equality_residual(kernel.value(t) + kernel.conj(s), t * s)
}

/// Fenchel–Young inequality `ts ≤ h(t) + h*(s)`.
pub fn fenchel_young_residual<K: ScalarKernel + ?Sized>(kernel: &K, t: f64, s: f64) -> f64 {
    slack(t * s, kernel.value(t) + kernel.conj(s))
}

/// `φ(∇φ*(y)) = ⟨∇φ*(y), y⟩ - φ*(y)`.
pub fn conjugate_identity_residual<K: ScalarKernel>(reference: &ReferenceFunction<K>, y: &Array1<f64>) -> f64 {
    let u = reference.precondition(y);
    equality_residual(reference.stationarity(y), u.dot(y) - reference.conjugate(y))
}

/// `h(θt) ≤ θ² h(t)`.
pub fn subhomogeneity_residual<K: ScalarKernel + ?Sized>(kernel: &K, theta: f64, t: f64) -> f64 {
    slack(kernel.value(theta * t), theta * theta * kernel.value(t))
}

/// `φ(Σλᵢxᵢ) ≤ c·Σλᵢφ(xᵢ)` with `c = 1`, or `c = Σλᵢ` when `scaled`.
pub fn subconvexity_residual<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    weights: &[f64],
    points: &[Array1<f64>],
    scaled: bool,
) -> Result<f64, AnalysisError> {
    let total: f64 = weights.iter().sum();
    if weights.len() != points.len()
        || points.is_empty()
        || total > 1.0 + 1e-15
        || weights.iter().any(|w| *w < 0.0)
    {
        return Err(AnalysisError::InvalidCombination);
    }
    let mut combo = Array1::<f64>::zeros(points[0].len());
    let mut rhs = 0.0;
    for (w, x) in weights.iter().zip(points) {
        combo.scaled_add(*w, x);
        rhs += w * reference.value(x).unwrap_or(f64::INFINITY);
    }
    if scaled {
        rhs *= total;
    }
    let lhs = reference.value(&combo).unwrap_or(f64::INFINITY);
    Ok(slack(lhs, rhs))
}

/// `φ(∇φ*(y)) ≤ ‖y‖²/(2μ_φ)`.
pub fn dual_upper_residual<K: ScalarKernel>(reference: &ReferenceFunction<K>, y: &Array1<f64>) -> f64 {
    let yy = norm(y).powi(2);
    slack(reference.stationarity(y), yy / (2.0 * reference.strong_convexity()))
}

/// `((√(1+β²)-1)/β²)‖y‖² ≤ φ(∇φ*(y))` for cosh and `‖y‖ ≤ β`.
pub fn cosh_local_lower_residual(y: &Array1<f64>, beta: f64) -> Result<f64, AnalysisError> {
    param("beta", beta, "(0, ∞)", beta > 0.0)?;
    let r = norm(y);
    param("beta", beta, "[‖y‖, ∞)", r <= beta)?;
    let c = ((1.0 + beta * beta).sqrt() - 1.0) / (beta * beta);
    let phi = ReferenceFunction::isotropic(Kernel::Cosh).stationarity(y);
    Ok(slack(c * r * r, phi))
}

fn require_unit_cosh<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    what: &'static str,
) -> Result<(), AnalysisError> {
    if reference.kernel().name() != "cosh" || reference.scale() != 1.0 {
        return Err(AnalysisError::UnsupportedReference(what));
    }
    Ok(())
}

/// `φ(∇φ*(y) - ∇φ*(ȳ)) ≤ ½‖y - ȳ‖²` for the unit cosh references.
pub fn noise_majorization_residual<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    y: &Array1<f64>,
    ybar: &Array1<f64>,
) -> Result<f64, AnalysisError> {
    require_unit_cosh(reference, "noise majorization")?;
    let diff = reference.precondition(y) - reference.precondition(ybar);
    let lhs = reference.value(&diff).unwrap_or(f64::INFINITY);
    Ok(slack(lhs, 0.5 * distance(y, ybar).powi(2)))
}

/// Scalar form `cosh(arsinh a - arsinh b) - 1 ≤ ½(a - b)²`.
pub fn scalar_cosh_majorization_residual(a: f64, b: f64) -> f64 {
    let d = a.asinh() - b.asinh();
    slack(Kernel::Cosh.value(d), 0.5 * (a - b) * (a - b))
}

/// `φ(x - x̄) + ½(φ(x) - φ(x̄))² ≤ ½‖∇φ(x) - ∇φ(x̄)‖²` for `φ = cosh(‖·‖) - 1`.
pub fn cosh_primal_majorization_residual(x: &Array1<f64>, xbar: &Array1<f64>) -> f64 {
    let phi = ReferenceFunction::isotropic(Kernel::Cosh);
    let value = |v: &Array1<f64>| phi.value(v).unwrap_or(f64::INFINITY);
    let grad = |v: &Array1<f64>| phi.gradient(v).unwrap_or_else(|_| v.mapv(|_| f64::NAN));
    let lhs = value(&(x - xbar)) + 0.5 * (value(x) - value(xbar)).powi(2);
    let rhs = 0.5 * distance(&grad(x), &grad(xbar)).powi(2);
    slack(lhs, rhs)
}

/// Anisotropic descent inequality at `(x, x̄)`:
/// `f(x) ≤ f(x̄) + (1/L)⋆φ(x - ȳ) - (1/L)⋆φ(x̄ - ȳ)` with
/// `ȳ = x̄ - (1/L)∇φ*(∇f(x̄))`. Outside the domain the inequality holds
/// vacuously and the residual is `+∞`.
pub fn aniso_descent_residual<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    l: f64,
    x: &Array1<f64>,
    xbar: &Array1<f64>,
) -> f64
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    let c = 1.0 / l;
    let u = reference.precondition(&problem.gradient(xbar));
    let ybar = xbar - &(&u * c);
    let far = reference.episcale_value(c, &(x - &ybar));
    let near = reference.episcale_value(c, &(xbar - &ybar));
    match (far, near) {
        (Ok(far), Ok(near)) => slack(problem.value(x), problem.value(xbar) + far - near),
        _ => f64::INFINITY,
    }
}

/// `‖∇φ*(∇f(x)) - ∇φ*(∇f(x̄))‖ ≤ L‖x - x̄‖`.
pub fn precond_lipschitz_residual<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    l: f64,
    x: &Array1<f64>,
    xbar: &Array1<f64>,
) -> f64
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    let u = reference.precondition(&problem.gradient(x));
    let ubar = reference.precondition(&problem.gradient(xbar));
    slack(distance(&u, &ubar), l * distance(x, xbar))
}

/// `μ(f(x) - f⋆) ≤ φ(∇φ*(∇f(x)))`.
pub fn grad_dominance_residual<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    mu: f64,
    x: &Array1<f64>,
) -> Result<f64, AnalysisError>
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    let f_star = problem.f_star().ok_or(AnalysisError::UnknownOptimum)?;
    let lhs = mu * (problem.value(x) - f_star);
    Ok(slack(lhs, reference.stationarity(&problem.gradient(x))))
}

// ---------------------------------------------------------------------------
// rate bounds

/// `L·gap / (α(K+1)(1-2β))`, bounding `min_{k≤K} φ(∇φ*(∇f(xᵏ)))` for the
/// momentum method with `γ = α/L`.
pub fn momentum_sublinear_bound(l: f64, gap: f64, alpha: f64, beta: f64, k: usize) -> Result<f64, AnalysisError> {
    param("beta", beta, "[0, 0.5)", (0.0..0.5).contains(&beta))?;
    param("alpha", alpha, "(0, 1]", alpha > 0.0 && alpha <= 1.0)?;
    param("L", l, "(0, ∞)", l > 0.0)?;
    Ok(l * gap / (alpha * (k as f64 + 1.0) * (1.0 - 2.0 * beta)))
}

/// `max{1 - γμ(β - 2β²), β + 2β²}`, the linear rate of the momentum method
/// under gradient dominance with a 2-subhomogeneous reference.
pub fn momentum_linear_factor(beta: f64, gamma: f64, mu: f64) -> Result<f64, AnalysisError> {
    param("beta", beta, "(0, 0.5)", beta > 0.0 && beta < 0.5)?;
    let gm = gamma * mu;
    param("gamma*mu", gm, "(0, 1]", gm > 0.0 && gm <= 1.0)?;
    let q = beta - 2.0 * beta * beta;
    Ok((1.0 - gm * q).max(beta + 2.0 * beta * beta))
}

/// `(1/K)(gap/(βγ) + φ(u⁰)/(1-β))`, bounding `min_{1≤k≤K}` stationarity when
/// the preconditioned gradient is `L`-Lipschitz and `γ = (1-β)²/L`.
pub fn momentum_lipschitz_bound(gap: f64, beta: f64, gamma: f64, phi_u0: f64, k: usize) -> Result<f64, AnalysisError> {
    param("beta", beta, "(0, 1)", beta > 0.0 && beta < 1.0)?;
    param("K", k as f64, "[1, ∞)", k >= 1)?;
    param("gamma", gamma, "(0, ∞)", gamma > 0.0)?;
    Ok((gap / (beta * gamma) + phi_u0 / (1.0 - beta)) / k as f64)
}

/// `gap/(γK) + σ²`, bounding the expected average stationarity of the
/// stochastic method when `E φ(∇φ*(∇f) - ∇φ*(g)) ≤ σ²`.
pub fn stochastic_bound(gap: f64, gamma: f64, k: usize, sigma2: f64) -> Result<f64, AnalysisError> {
    param("gamma", gamma, "(0, ∞)", gamma > 0.0)?;
    param("K", k as f64, "[1, ∞)", k >= 1)?;
    param("sigma2", sigma2, "[0, ∞)", sigma2 >= 0.0)?;
    Ok(gap / (gamma * k as f64) + sigma2)
}

/// `(1/K)(gap/γ + σ²/2)` for unbiased oracles with `E‖∇f - g‖² ≤ σ²/K`.
pub fn minibatch_bound(gap: f64, gamma: f64, k: usize, sigma2: f64) -> Result<f64, AnalysisError> {
    param("gamma", gamma, "(0, ∞)", gamma > 0.0)?;
    param("K", k as f64, "[1, ∞)", k >= 1)?;
    param("sigma2", sigma2, "[0, ∞)", sigma2 >= 0.0)?;
    Ok((gap / gamma + 0.5 * sigma2) / k as f64)
}

/// `(1-γμ)ᵏ·gap + σ²/μ`, the expected suboptimality envelope under gradient
/// dominance.
pub fn stochastic_linear_bound(gap: f64, gamma: f64, mu: f64, sigma2: f64, k: usize) -> Result<f64, AnalysisError> {
    let gm = gamma * mu;
    param("gamma*mu", gm, "(0, 1]", gm > 0.0 && gm <= 1.0)?;
    param("sigma2", sigma2, "[0, ∞)", sigma2 >= 0.0)?;
    Ok((1.0 - gm).powi(k as i32) * gap + sigma2 / mu)
}

/// Checks `δₖ ≤ |1-α|ᵏδ₀ + θ/(1-|1-α|)` for a sequence satisfying
/// `δₖ₊₁ ≤ (1-α)δₖ + θ`. A sequence that violates the recursion is reported
/// as a precondition failure.
pub fn check_sequence_lemma(delta: &[f64], alpha: f64, theta: f64) -> CheckReport {
    let mut report = CheckReport::new("sequence-lemma", INEQUALITY_TOL);
    if !(alpha > 0.0 && alpha < 2.0) || !(theta > 0.0) {
        report.precondition_failure = Some(format!("need alpha in (0, 2) and theta > 0, got alpha={alpha} theta={theta}"));
        return report;
    }
    if let Some(i) = delta.iter().position(|d| !(*d >= 0.0)) {
        report.precondition_failure = Some(format!("delta[{i}] = {} is negative", delta[i]));
        return report;
    }
    for (k, w) in delta.windows(2).enumerate() {
        let allowed = (1.0 - alpha) * w[0] + theta;
        if slack(w[1], allowed) < -INEQUALITY_TOL {
            report.precondition_failure = Some(format!(
                "recursion violated at k={k}: delta[k+1]={} > {allowed}",
                w[1]
            ));
            return report;
        }
    }
    let q = (1.0 - alpha).abs();
    let tail = theta / (1.0 - q);
    let mut qk = 1.0;
    for (k, d) in delta.iter().enumerate() {
        let bound = qk * delta[0] + tail;
        report.record(slack(*d, bound), || format!("k={k} delta={d} bound={bound}"));
        qk *= q;
    }
    report
}

// ---------------------------------------------------------------------------
// noise

/// Monte-Carlo noise level `max_x E[φ(∇φ*(∇f(x)) - ∇φ*(g(x)))]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    pub sigma2: f64,
    /// standard error of the mean at the maximising point
    pub standard_error: f64,
    /// index into the probed points of the maximiser
    pub argmax: usize,
}

pub fn noise_level_estimate<P, K>(
    oracle: &P,
    reference: &ReferenceFunction<K>,
    xs: &[Array1<f64>],
    batch: usize,
    draws: usize,
    rng: &mut dyn RngCore,
) -> NoiseEstimate
where
    P: StochasticOracle + ?Sized,
    K: ScalarKernel,
{
    assert!(draws >= 1, "need at least one draw");
    let mut best = NoiseEstimate {
        sigma2: 0.0,
        standard_error: 0.0,
        argmax: 0,
    };
    for (i, x) in xs.iter().enumerate() {
        let u = reference.precondition(&oracle.gradient(x));
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..draws {
            let g = oracle.stochastic_gradient(x, rng, batch);
            let v = reference
                .value(&(&u - &reference.precondition(&g)))
                .unwrap_or(f64::INFINITY);
            sum += v;
            sumsq += v * v;
        }
        let n = draws as f64;
        let mean = sum / n;
        let var = if draws > 1 {
            ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        if i == 0 || mean > best.sigma2 {
            best = NoiseEstimate {
                sigma2: mean,
                standard_error: (var / n).sqrt(),
                argmax: i,
            };
        }
    }
    best
}

/// Monte-Carlo estimate of `max_x E‖∇f(x) - g(x)‖²` at the given batch size.
pub fn gradient_variance_estimate<P: StochasticOracle + ?Sized>(
    oracle: &P,
    xs: &[Array1<f64>],
    batch: usize,
    draws: usize,
    rng: &mut dyn RngCore,
) -> f64 {
    assert!(draws >= 1, "need at least one draw");
    xs.iter()
        .map(|x| {
            let g = oracle.gradient(x);
            (0..draws)
                .map(|_| distance(&g, &oracle.stochastic_gradient(x, rng, batch)).powi(2))
                .sum::<f64>()
                / draws as f64
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// trace certificates

/// Running minimum of stationarity against `bound(k)` at every record.
pub fn certify_min_stationarity(
    name: &str,
    records: &[Record],
    bound: impl Fn(usize) -> f64,
) -> RateCertificate {
    let mut running = f64::INFINITY;
    let mut ks = Vec::with_capacity(records.len());
    let mut observed = Vec::with_capacity(records.len());
    let mut bounds = Vec::with_capacity(records.len());
    for r in records {
        running = running.min(r.stationarity);
        ks.push(r.k);
        observed.push(running);
        bounds.push(bound(r.k));
    }
    RateCertificate::new(name, &ks, &bounds, &observed)
}

/// `f(xᵏ) - f⋆ ≤ factorᵏ·(f(x⁰) - f⋆)` at every record.
pub fn certify_linear_rate(name: &str, records: &[Record], f_star: f64, factor: f64) -> RateCertificate {
    let gap = records[0].f - f_star;
    let ks: Vec<usize> = records.iter().map(|r| r.k).collect();
    let observed: Vec<f64> = records.iter().map(|r| r.f - f_star).collect();
    let bounds: Vec<f64> = ks.iter().map(|&k| factor.powi(k as i32) * gap).collect();
    RateCertificate::new(name, &ks, &bounds, &observed)
}

/// `Vₖ₊₁ ≤ factor·Vₖ` for consecutive records carrying a Lyapunov value.
pub fn certify_lyapunov_contraction(name: &str, records: &[Record], factor: f64) -> RateCertificate {
    let mut ks = Vec::new();
    let mut bounds = Vec::new();
    let mut observed = Vec::new();
    for w in records.windows(2) {
        if let (Some(v0), Some(v1)) = (w[0].lyapunov, w[1].lyapunov) {
            ks.push(w[1].k);
            bounds.push(factor * v0);
            observed.push(v1);
        }
    }
    RateCertificate::new(name, &ks, &bounds, &observed)
}

// ---------------------------------------------------------------------------
// sampling

/// Gaussian sample scale drawn uniformly from `{0.1, 1, 10}`.
pub fn mixed_scale(rng: &mut dyn RngCore) -> f64 {
    [0.1, 1.0, 10.0][rng.random_range(0..3usize)]
}

pub fn gaussian_vector(rng: &mut dyn RngCore, dim: usize, scale: f64) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }))
}

/// A radius in `[0, r)`: uniform half the time, otherwise `r(1 - 10⁻ᵉ)` with
/// `e ∈ [1, 12]` to hug the boundary.
fn inner_radius(rng: &mut dyn RngCore, r: f64) -> f64 {
    if rng.random_bool(0.5) {
        r * rng.random::<f64>()
    } else {
        r * (1.0 - 10f64.powf(-rng.random_range(1.0..12.0)))
    }
}

/// Random scalar strictly inside the kernel domain.
pub fn sample_domain_scalar<K: ScalarKernel + ?Sized>(kernel: &K, rng: &mut dyn RngCore) -> f64 {
    let r = kernel.domain_radius();
    if r.is_finite() {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * inner_radius(rng, r)
    } else {
        let scale = mixed_scale(rng);
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }
}

/// Random point strictly inside `dom φ`, mixing scales and boundary-hugging
/// samples for bounded kernels.
pub fn sample_domain_point<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    dim: usize,
    rng: &mut dyn RngCore,
) -> Array1<f64> {
    let r = reference.kernel().domain_radius();
    if !r.is_finite() {
        let scale = mixed_scale(rng);
        return gaussian_vector(rng, dim, scale);
    }
    match reference.shape() {
        Shape::Isotropic => {
            let dir = gaussian_vector(rng, dim, 1.0);
            let n = norm(&dir);
            let radius = inner_radius(rng, r);
            if n == 0.0 {
                dir
            } else {
                dir * (radius / n)
            }
        }
        Shape::Separable => Array1::from_iter((0..dim).map(|_| sample_domain_scalar(reference.kernel(), rng))),
    }
}

// ---------------------------------------------------------------------------
// sampled certificates

fn vec_str(v: &Array1<f64>) -> String {
    format!("{:?}", v.as_slice().unwrap_or(&[]))
}

/// Inverse-map identity `h*'(h'(t)) = t` to an absolute `1e-10`.
pub fn certify_inverse_map<K: ScalarKernel + ?Sized>(kernel: &K, samples: usize, rng: &mut dyn RngCore) -> CheckReport {
    let mut report = CheckReport::new(format!("inverse-map/{}", kernel.name()), 1e-10);
    for _ in 0..samples {
        let t = sample_domain_scalar(kernel, rng);
        report.record(inverse_map_residual(kernel, t), || format!("t={t}"));
    }
    report
}

/// Fenchel–Young equality at `s = h'(t)` to `1e-10`, plus the inequality on
/// independent pairs to `1e-12`.
pub fn certify_fenchel_young<K: ScalarKernel + ?Sized>(kernel: &K, samples: usize, rng: &mut dyn RngCore) -> CheckReport {
    let mut report = CheckReport::new(format!("fenchel-young/{}", kernel.name()), 1e-10);
    let mut pairs = CheckReport::new("", 1e-12);
    for _ in 0..samples {
        let t = sample_domain_scalar(kernel, rng);
        report.record(fenchel_young_equality_residual(kernel, t), || format!("t={t}"));
        let s = {
            let z: f64 = StandardNormal.sample(rng);
            mixed_scale(rng) * z
        };
        pairs.record(fenchel_young_residual(kernel, t, s), || format!("t={t} s={s}"));
    }
    report.merge(pairs);
    report
}

/// Conjugate identity `φ(∇φ*(y)) = ⟨∇φ*(y), y⟩ - φ*(y)` to `1e-10`.
pub fn certify_conjugate_identity<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    dim: usize,
    samples: usize,
    rng: &mut dyn RngCore,
) -> CheckReport {
    let mut report = CheckReport::new(
        format!("conjugate-identity/{}/{}", reference.kernel().name(), reference.shape()),
        1e-10,
    );
    for _ in 0..samples {
        let scale = mixed_scale(rng);
        let y = gaussian_vector(rng, dim, scale);
        report.record(conjugate_identity_residual(reference, &y), || format!("y={}", vec_str(&y)));
    }
    report
}

/// `h(θt) ≤ θ²h(t)` on `θ ∈ {0, 0.01, …, 1}` times a grid of `t` inside the domain.
pub fn certify_subhomogeneity<K: ScalarKernel + ?Sized>(kernel: &K) -> CheckReport {
    let mut report = CheckReport::new(format!("subhomogeneity/{}", kernel.name()), 1e-12);
    let r = kernel.domain_radius();
    let ts: Vec<f64> = if r.is_finite() {
        let mut ts: Vec<f64> = (1..200).map(|i| r * i as f64 / 200.0).collect();
        ts.extend((1..=12).map(|e| r * (1.0 - 10f64.powi(-e))));
        ts
    } else {
        (1..=400).map(|i| i as f64 * 0.05).collect()
    };
    for &t in &ts {
        for sign in [1.0, -1.0] {
            for i in 0..=100 {
                let theta = i as f64 / 100.0;
                report.record(subhomogeneity_residual(kernel, theta, sign * t), || {
                    format!("theta={theta} t={}", sign * t)
                });
            }
        }
    }
    report
}

/// Subconvexity on random combinations with `Σλᵢ ≤ 1`; with `scaled`, the
/// sharper form carrying the extra factor `Σλᵢ`.
pub fn certify_subconvexity<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    dim: usize,
    samples: usize,
    scaled: bool,
    rng: &mut dyn RngCore,
) -> CheckReport {
    let label = if scaled { "subconvexity-scaled" } else { "subconvexity" };
    let mut report = CheckReport::new(
        format!("{label}/{}/{}", reference.kernel().name(), reference.shape()),
        1e-12,
    );
    for _ in 0..samples {
        let d = rng.random_range(1..=5usize);
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let total: f64 = rng.random::<f64>();
        let sum: f64 = raw.iter().sum::<f64>().max(f64::MIN_POSITIVE);
        let weights: Vec<f64> = raw.iter().map(|w| w / sum * total).collect();
        let points: Vec<Array1<f64>> = (0..d).map(|_| sample_domain_point(reference, dim, rng)).collect();
        let res = subconvexity_residual(reference, &weights, &points, scaled).unwrap_or(f64::NAN);
        report.record(res, || format!("weights={weights:?}"));
    }
    report
}

/// `φ(∇φ*(y)) ≤ ‖y‖²/(2μ_φ)`.
pub fn certify_dual_upper<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    dim: usize,
    samples: usize,
    rng: &mut dyn RngCore,
) -> CheckReport {
    let mut report = CheckReport::new(
        format!("dual-upper/{}/{}", reference.kernel().name(), reference.shape()),
        1e-12,
    );
    for _ in 0..samples {
        let scale = mixed_scale(rng);
        let y = gaussian_vector(rng, dim, scale);
        report.record(dual_upper_residual(reference, &y), || format!("y={}", vec_str(&y)));
    }
    report
}

/// Local cosh lower bound for `‖y‖ ≤ β ≤ 10`.
pub fn certify_cosh_local_lower(dim: usize, samples: usize, rng: &mut dyn RngCore) -> CheckReport {
    let mut report = CheckReport::new("cosh-local-lower", 1e-12);
    for _ in 0..samples {
        let beta = 10.0 * (1.0 - rng.random::<f64>()); // (0, 10]
        let dir = gaussian_vector(rng, dim, 1.0);
        let radius = beta * rng.random::<f64>();
        let n = norm(&dir);
        let y = if n == 0.0 { dir } else { dir * (radius / n) };
        let res = cosh_local_lower_residual(&y, beta).unwrap_or(f64::NAN);
        report.record(res, || format!("beta={beta} y={}", vec_str(&y)));
    }
    report
}

/// Noise majorization on random pairs; for isotropic references the sharper
/// primal form is checked too.
pub fn certify_noise_majorization<K: ScalarKernel>(
    reference: &ReferenceFunction<K>,
    dim: usize,
    pairs: usize,
    rng: &mut dyn RngCore,
) -> Result<CheckReport, AnalysisError> {
    require_unit_cosh(reference, "noise majorization")?;
    let mut report = CheckReport::new(format!("noise-majorization/{}", reference.shape()), 1e-12);
    for _ in 0..pairs {
        let (sy, sb) = (mixed_scale(rng), mixed_scale(rng));
        let y = gaussian_vector(rng, dim, sy);
        let ybar = gaussian_vector(rng, dim, sb);
        let res = noise_majorization_residual(reference, &y, &ybar)?;
        report.record(res, || format!("y={} ybar={}", vec_str(&y), vec_str(&ybar)));
    }
    Ok(report)
}

/// `cosh(arsinh a - arsinh b) - 1 ≤ ½(a - b)²` on random scalars.
pub fn certify_scalar_cosh_majorization(pairs: usize, rng: &mut dyn RngCore) -> CheckReport {
    let mut report = CheckReport::new("noise-majorization/scalar", 1e-12);
    for _ in 0..pairs {
        let (sa, sb) = (mixed_scale(rng), mixed_scale(rng));
        let (za, zb): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        let (a, b) = (sa * za, sb * zb);
        report.record(scalar_cosh_majorization_residual(a, b), || format!("a={a} b={b}"));
    }
    report
}

/// Sharper primal form of the isotropic cosh majorization; points have norm
/// at most about 30 so that `cosh²` stays representable.
pub fn certify_cosh_primal_majorization(dim: usize, pairs: usize, rng: &mut dyn RngCore) -> CheckReport {
    let mut report = CheckReport::new("noise-majorization/primal", 1e-12);
    for _ in 0..pairs {
        let root = (dim as f64).sqrt();
        let (sx, sb) = (mixed_scale(rng) / root, mixed_scale(rng) / root);
        let x = gaussian_vector(rng, dim, sx);
        let xbar = gaussian_vector(rng, dim, sb);
        report.record(cosh_primal_majorization_residual(&x, &xbar), || {
            format!("x={} xbar={}", vec_str(&x), vec_str(&xbar))
        });
    }
    report
}

/// Anisotropic descent on random pairs drawn at `scale`.
pub fn certify_aniso_descent<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    l: f64,
    pairs: usize,
    rng: &mut dyn RngCore,
) -> CheckReport
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    let mut report = CheckReport::new(format!("aniso-descent/L={l}"), INEQUALITY_TOL);
    let dim = problem.dim();
    for _ in 0..pairs {
        let (sx, sb) = (mixed_scale(rng).min(3.0), mixed_scale(rng).min(3.0));
        let x = gaussian_vector(rng, dim, sx);
        let xbar = gaussian_vector(rng, dim, sb);
        report.record(aniso_descent_residual(problem, reference, l, &x, &xbar), || {
            format!("x={} xbar={}", vec_str(&x), vec_str(&xbar))
        });
    }
    report
}

/// Preconditioned Lipschitz continuity on random pairs.
pub fn certify_precond_lipschitz<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    l: f64,
    pairs: usize,
    rng: &mut dyn RngCore,
) -> CheckReport
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    let mut report = CheckReport::new(format!("precond-lipschitz/L={l}"), INEQUALITY_TOL);
    let dim = problem.dim();
    for _ in 0..pairs {
        let sx = mixed_scale(rng);
        let x = gaussian_vector(rng, dim, sx);
        let xbar = if rng.random_bool(0.5) {
            &x + &gaussian_vector(rng, dim, 1e-3)
        } else {
            let sb = mixed_scale(rng);
            gaussian_vector(rng, dim, sb)
        };
        report.record(precond_lipschitz_residual(problem, reference, l, &x, &xbar), || {
            format!("x={} xbar={}", vec_str(&x), vec_str(&xbar))
        });
    }
    report
}

/// Kernel wrapper that shifts `h*'` by a constant, for mutation testing the
/// certificates.
#[derive(Debug, Clone)]
pub struct Perturbed<K> {
    pub inner: K,
    pub shift: f64,
}

impl<K: ScalarKernel> ScalarKernel for Perturbed<K> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn domain_radius(&self) -> f64 {
        self.inner.domain_radius()
    }
    fn in_domain(&self, t: f64) -> bool {
        self.inner.in_domain(t)
    }
    fn value(&self, t: f64) -> f64 {
        self.inner.value(t)
    }
    fn deriv(&self, t: f64) -> f64 {
        self.inner.deriv(t)
    }
    fn conj(&self, s: f64) -> f64 {
        self.inner.conj(s)
    }
    fn conj_deriv(&self, s: f64) -> f64 {
        self.inner.conj_deriv(s) + self.shift
    }
    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity()
    }
    fn two_subhomogeneous(&self) -> bool {
        self.inner.two_subhomogeneous()
    }
}
