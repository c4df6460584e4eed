//! Step functions and the run loop.
//!
//! Every step is pure: it borrows the current state and returns the next one.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::kernels::{Kernel, ReferenceFunction, ScalarKernel};
use crate::linalg::norm;
use crate::problems::{Objective, StochasticOracle};

/// Runs abort once `f` exceeds this multiple of `1 + |f(x⁰)|`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite gradient at iteration {k}")]
    NonFiniteGradient { k: usize },
    #[error("stepsize gamma must be positive and finite, got {0}")]
    InvalidStepsize(f64),
    #[error("momentum beta must lie in [0, 1), got {0}")]
    InvalidMomentum(f64),
    #[error("clipping threshold eta must be positive and finite, got {0}")]
    InvalidClip(f64),
    #[error("batch size must be at least 1")]
    InvalidBatch,
    #[error("iterate has dimension {got}, problem expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("eval_every must be at least 1")]
    InvalidEvalEvery,
    #[error(transparent)]
    Step(#[from] StepError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// `x⁺ = x - γ∇φ*(∇f(x))`
    Npgm,
    /// heavy-ball momentum on the preconditioned gradient
    Mnpgm,
    /// `x⁺ = x - γ∇φ*(g(x))` with a minibatch oracle
    Snpgm,
    Gd,
    Gdm,
    /// `x⁺ = x - min(γ, η/‖g‖)·g` with a minibatch oracle
    Clipped,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Npgm,
        Method::Mnpgm,
        Method::Snpgm,
        Method::Gd,
        Method::Gdm,
        Method::Clipped,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Npgm => "npgm",
            Method::Mnpgm => "mnpgm",
            Method::Snpgm => "snpgm",
            Method::Gd => "gd",
            Method::Gdm => "gdm",
            Method::Clipped => "clipped",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Snpgm | Method::Clipped)
    }

    pub fn uses_momentum(self) -> bool {
        matches!(self, Method::Mnpgm | Method::Gdm)
    }

    /// Whether the update is driven by the configured reference function
    /// (the baselines are driven by the plain quadratic).
    pub fn uses_reference(self) -> bool {
        matches!(self, Method::Npgm | Method::Mnpgm | Method::Snpgm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method `{s}` (expected one of npgm, mnpgm, snpgm, gd, gdm, clipped)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Array1<f64>,
    /// momentum buffer, `m⁻¹ = 0`
    pub m: Array1<f64>,
    pub k: usize,
    pub gamma: f64,
    pub beta: f64,
}

impl OptimizerState {
    pub fn new(x0: Array1<f64>, gamma: f64, beta: f64) -> Result<Self, StepError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(StepError::InvalidStepsize(gamma));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(StepError::InvalidMomentum(beta));
        }
        let m = Array1::zeros(x0.len());
        Ok(Self {
            x: x0,
            m,
            k: 0,
            gamma,
            beta,
        })
    }

    fn advance(&self, x: Array1<f64>, m: Array1<f64>) -> Self {
        Self {
            x,
            m,
            k: self.k + 1,
            gamma: self.gamma,
            beta: self.beta,
        }
    }
}

fn check_dim(state: &OptimizerState, dim: usize) -> Result<(), StepError> {
    if state.x.len() != dim {
        return Err(StepError::DimensionMismatch {
            expected: dim,
            got: state.x.len(),
        });
    }
    Ok(())
}

fn finite(g: Array1<f64>, k: usize) -> Result<Array1<f64>, StepError> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err(StepError::NonFiniteGradient { k })
    }
}

/// `u = ∇φ*(∇f(x))`.
pub fn preconditioned_gradient<P, K>(
    problem: &P,
    reference: &ReferenceFunction<K>,
    x: &Array1<f64>,
) -> Array1<f64>
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    reference.precondition(&problem.gradient(x))
}

pub fn npgm_step<P, K>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferenceFunction<K>,
) -> Result<OptimizerState, StepError>
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    check_dim(state, problem.dim())?;
    let g = finite(problem.gradient(&state.x), state.k)?;
    let u = reference.precondition(&g);
    let x = &state.x - &(u * state.gamma);
    Ok(state.advance(x, state.m.clone()))
}

/// `mᵏ = βmᵏ⁻¹ + (1-β)∇φ*(∇f(xᵏ))`, `xᵏ⁺¹ = xᵏ - γmᵏ`.
pub fn mnpgm_step<P, K>(
    state: &OptimizerState,
    problem: &P,
    reference: &ReferenceFunction<K>,
) -> Result<OptimizerState, StepError>
where
    P: Objective + ?Sized,
    K: ScalarKernel,
{
    check_dim(state, problem.dim())?;
    let g = finite(problem.gradient(&state.x), state.k)?;
    let u = reference.precondition(&g);
    Ok(momentum_update(state, u))
}

fn momentum_update(state: &OptimizerState, u: Array1<f64>) -> OptimizerState {
    let m = &state.m * state.beta + &(u * (1.0 - state.beta));
    let x = &state.x - &(&m * state.gamma);
    state.advance(x, m)
}

pub fn snpgm_step<P, K>(
    state: &OptimizerState,
    oracle: &P,
    reference: &ReferenceFunction<K>,
    rng: &mut dyn RngCore,
    batch: usize,
) -> Result<OptimizerState, StepError>
where
    P: StochasticOracle + ?Sized,
    K: ScalarKernel,
{
    check_dim(state, oracle.dim())?;
    if batch == 0 {
        return Err(StepError::InvalidBatch);
    }
    let g = finite(oracle.stochastic_gradient(&state.x, rng, batch), state.k)?;
    let u = reference.precondition(&g);
    let x = &state.x - &(u * state.gamma);
    Ok(state.advance(x, state.m.clone()))
}

pub fn gd_step<P: Objective + ?Sized>(
    state: &OptimizerState,
    problem: &P,
) -> Result<OptimizerState, StepError> {
    check_dim(state, problem.dim())?;
    let g = finite(problem.gradient(&state.x), state.k)?;
    let x = &state.x - &(g * state.gamma);
    Ok(state.advance(x, state.m.clone()))
}

/// `m⁺ = βm + (1-β)∇f(x)`, `x⁺ = x - γm⁺`.
pub fn gdm_step<P: Objective + ?Sized>(
    state: &OptimizerState,
    problem: &P,
) -> Result<OptimizerState, StepError> {
    check_dim(state, problem.dim())?;
    let g = finite(problem.gradient(&state.x), state.k)?;
    Ok(momentum_update(state, g))
}

/// `x⁺ = x - min(γ, η/‖g‖)·g`; the clipping stepsize is `state.gamma`.
pub fn clipped_step<P: StochasticOracle + ?Sized>(
    state: &OptimizerState,
    oracle: &P,
    eta: f64,
    rng: &mut dyn RngCore,
    batch: usize,
) -> Result<OptimizerState, StepError> {
    check_dim(state, oracle.dim())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(StepError::InvalidClip(eta));
    }
    if batch == 0 {
        return Err(StepError::InvalidBatch);
    }
    let g = oracle.stochastic_gradient(&state.x, rng, batch);
    let gn = norm(&g);
    if gn == 0.0 {
        return Ok(state.advance(state.x.clone(), state.m.clone()));
    }
    let step = state.gamma.min(eta / gn);
    let x = &state.x - &(g * step);
    Ok(state.advance(x, state.m.clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub gamma: f64,
    pub beta: f64,
    pub batch: usize,
    pub iterations: usize,
    /// logging cadence; the final iterate is always logged
    pub eval_every: usize,
    /// clipping threshold, used by [`Method::Clipped`]
    pub eta: f64,
    /// fill the `elapsed_ns` column (makes traces non-reproducible byte for byte)
    pub record_time: bool,
}

impl RunConfig {
    pub fn new(method: Method, gamma: f64, iterations: usize) -> Self {
        Self {
            method,
            gamma,
            beta: 0.0,
            batch: 1,
            iterations,
            eval_every: if method.is_stochastic() { 10 } else { 1 },
            eta: 0.000023,
            record_time: false,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    pub fn with_eval_every(mut self, eval_every: usize) -> Self {
        self.eval_every = eval_every;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.iterations == 0 {
            return Err(RunError::NoIterations);
        }
        if self.eval_every == 0 {
            return Err(RunError::InvalidEvalEvery);
        }
        if self.batch == 0 {
            return Err(StepError::InvalidBatch.into());
        }
        if self.method == Method::Clipped && !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(StepError::InvalidClip(self.eta).into());
        }
        OptimizerState::new(Array1::zeros(0), self.gamma, self.beta)?;
        Ok(())
    }
}

/// One logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub k: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub stationarity: f64,
    /// `γφ(mᵏ⁻¹) + f(xᵏ) - f⋆`, present only when `f⋆` is known
    pub lyapunov: Option<f64>,
    pub elapsed_ns: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<Record>,
    pub seed: u64,
    /// resolved configuration, filled in by the caller
    pub config_echo: String,
    /// reason the run stopped early, if it did
    pub abort: Option<String>,
    pub final_state: OptimizerState,
}

impl RunTrace {
    pub fn final_value(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn min_stationarity(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.stationarity)
            .fold(f64::INFINITY, f64::min)
    }
}

pub const CSV_HEADER: &str = "k,f,grad_norm,stationarity,lyapunov,elapsed_ns";

fn fmt_float(v: f64) -> String {
    // 17 significant digits
    format!("{v:.16e}")
}

/// Serialises records with the fixed header; empty cells mark absent values.
pub fn trace_to_csv(records: &[Record]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let lyap = r.lyapunov.map(fmt_float).unwrap_or_default();
        let elapsed = r.elapsed_ns.map(|t| t.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k,
            fmt_float(r.f),
            fmt_float(r.grad_norm),
            fmt_float(r.stationarity),
            lyap,
            elapsed
        ));
    }
    out
}

/// Starting point drawn from the problem's default law on stream 0 of `seed`.
pub fn seeded_initial_point<P: Objective + ?Sized>(problem: &P, seed: u64, scale: f64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    problem.initial_point(&mut rng, scale)
}

/// Executes `cfg.iterations` steps from `x0`.
///
/// Stochastic methods draw on stream 1 of `seed`. Records are taken at
/// `k = 0`, every `eval_every` iterations and at the last iterate, always
/// using the full gradient. Divergence (`f` non-finite or above
/// [`DIVERGENCE_FACTOR`]`·(1 + |f(x⁰)|)`) stops the run with an abort reason.
pub fn run<P>(
    problem: &P,
    reference: &ReferenceFunction,
    cfg: &RunConfig,
    x0: Array1<f64>,
    seed: u64,
) -> Result<RunTrace, RunError>
where
    P: StochasticOracle + ?Sized,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let quadratic = ReferenceFunction::isotropic(Kernel::Quadratic);
    let generator = if cfg.method.uses_reference() {
        reference
    } else {
        &quadratic
    };
    let f_star = problem.f_star();
    let start = Instant::now();

    let mut state = OptimizerState::new(x0, cfg.gamma, cfg.beta)?;
    check_dim(&state, problem.dim())?;
    let f0 = problem.value(&state.x);
    let limit = DIVERGENCE_FACTOR * (1.0 + f0.abs());

    let record = |state: &OptimizerState, f: f64| -> Record {
        let g = problem.gradient(&state.x);
        let lyapunov = f_star.and_then(|fs| {
            generator
                .value(&state.m)
                .ok()
                .map(|phi_m| state.gamma * phi_m + f - fs)
        });
        Record {
            k: state.k,
            f,
            grad_norm: norm(&g),
            stationarity: reference.stationarity(&g),
            lyapunov,
            elapsed_ns: cfg
                .record_time
                .then(|| start.elapsed().as_nanos().min(u64::MAX as u128) as u64),
        }
    };

    let mut records = vec![record(&state, f0)];
    let mut abort = None;
    if !f0.is_finite() {
        abort = Some(format!("non-finite objective {f0} at the starting point"));
    }
    while abort.is_none() && state.k < cfg.iterations {
        state = match cfg.method {
            Method::Npgm => npgm_step(&state, problem, reference)?,
            Method::Mnpgm => mnpgm_step(&state, problem, reference)?,
            Method::Snpgm => snpgm_step(&state, problem, reference, &mut rng, cfg.batch)?,
            Method::Gd => gd_step(&state, problem)?,
            Method::Gdm => gdm_step(&state, problem)?,
            Method::Clipped => clipped_step(&state, problem, cfg.eta, &mut rng, cfg.batch)?,
        };
        let f = problem.value(&state.x);
        let diverged = !f.is_finite() || f > limit;
        if diverged {
            abort = Some(format!("diverged at iteration {}: f = {f:e}", state.k));
        }
        if diverged || state.k % cfg.eval_every == 0 || state.k == cfg.iterations {
            records.push(record(&state, f));
        }
    }
    Ok(RunTrace {
        records,
        seed,
        config_echo: String::new(),
        abort,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Noiseless, PhaseRetrieval, Quadratic, SelfCalibratedCosh, TwoAtomQuadratic};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn cosh() -> ReferenceFunction {
        ReferenceFunction::isotropic(Kernel::Cosh)
    }

    #[test]
    fn npgm_examples() {
        let q = Quadratic::new(1).unwrap();
        let s = OptimizerState::new(array![1.0], 1.0, 0.0).unwrap();
        let next = npgm_step(&s, &q, &cosh()).unwrap();
        assert_abs_diff_eq!(next.x[0], 1.0 - 1f64.asinh(), epsilon = 1e-15);
        assert_abs_diff_eq!(next.x[0], 0.11863, epsilon = 1e-5);
        assert_eq!(next.k, 1);

        let at_min = OptimizerState::new(array![0.0], 1.0, 0.0).unwrap();
        assert_eq!(npgm_step(&at_min, &q, &cosh()).unwrap().x, at_min.x);

        let s = OptimizerState::new(array![0.3, -2.0], 0.7, 0.0).unwrap();
        let q2 = Quadratic::new(2).unwrap();
        let quad = ReferenceFunction::isotropic(Kernel::Quadratic);
        assert_eq!(npgm_step(&s, &q2, &quad).unwrap(), gd_step(&s, &q2).unwrap());
    }

    #[test]
    fn state_validation() {
        assert!(OptimizerState::new(array![0.0], 0.0, 0.0).is_err());
        assert!(OptimizerState::new(array![0.0], 1.0, 1.0).is_err());
        assert!(OptimizerState::new(array![0.0], 1.0, -0.1).is_err());
        let s = OptimizerState::new(array![0.0, 1.0], 1.0, 0.0).unwrap();
        let q = Quadratic::new(3).unwrap();
        assert!(matches!(gd_step(&s, &q), Err(StepError::DimensionMismatch { .. })));
    }

    #[test]
    fn momentum_first_step_and_beta_zero() {
        let p = SelfCalibratedCosh::new(2).unwrap();
        let r = ReferenceFunction::separable(Kernel::Cosh);
        let x0 = array![0.8, -1.5];
        let u0 = preconditioned_gradient(&p, &r, &x0);
        let s = OptimizerState::new(x0.clone(), 0.5, 0.3).unwrap();
        let next = mnpgm_step(&s, &p, &r).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(next.x[i], x0[i] - 0.5 * 0.7 * u0[i], epsilon = 1e-15);
        }
        let s0 = OptimizerState::new(x0, 0.5, 0.0).unwrap();
        assert_eq!(mnpgm_step(&s0, &p, &r).unwrap().x, npgm_step(&s0, &p, &r).unwrap().x);
        let q = Quadratic::new(2).unwrap();
        assert_eq!(gdm_step(&s0, &q).unwrap().x, gd_step(&s0, &q).unwrap().x);
    }

    #[test]
    fn gd_on_half_square_jumps_to_zero() {
        let q = Quadratic::new(3).unwrap();
        let s = OptimizerState::new(array![4.0, -1.0, 0.25], 1.0, 0.0).unwrap();
        assert!(gd_step(&s, &q).unwrap().x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stochastic_examples() {
        let p = TwoAtomQuadratic::new();
        // f'₁(1) = 0, so whenever atom 1 is drawn the iterate stays put
        let s = OptimizerState::new(array![1.0], 1.0, 0.0).unwrap();
        let mut seen_fixed = false;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let next = snpgm_step(&s, &p, &cosh(), &mut rng, 1).unwrap();
            if next.x[0] == 1.0 {
                seen_fixed = true;
            } else {
                assert_abs_diff_eq!(next.x[0], 1.0 - 12f64.asinh(), epsilon = 1e-15);
            }
        }
        assert!(seen_fixed);

        let det = Noiseless(SelfCalibratedCosh::new(2).unwrap());
        let s = OptimizerState::new(array![0.5, 2.0], 0.5, 0.0).unwrap();
        let a = snpgm_step(&s, &det, &cosh(), &mut ChaCha8Rng::seed_from_u64(1), 3).unwrap();
        let b = snpgm_step(&s, &det, &cosh(), &mut ChaCha8Rng::seed_from_u64(2), 3).unwrap();
        assert_eq!(a, b);
        assert!(snpgm_step(&s, &det, &cosh(), &mut ChaCha8Rng::seed_from_u64(2), 0).is_err());
    }

    #[test]
    fn clipped_examples() {
        let q = Noiseless(Quadratic::new(2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // ‖g‖ = 0.5 ≤ η/γ = 1: plain gradient step with stepsize γ
        let s = OptimizerState::new(array![0.3, 0.4], 0.5, 0.0).unwrap();
        let next = clipped_step(&s, &q, 0.5, &mut rng, 1).unwrap();
        assert_eq!(next.x, array![0.15, 0.2]);
        // large gradient: the step has length exactly η
        let s = OptimizerState::new(array![300.0, 400.0], 1.0, 0.0).unwrap();
        let next = clipped_step(&s, &q, 0.000023, &mut rng, 1).unwrap();
        // the difference of two ~500-sized iterates carries ~1e-13 rounding
        assert_abs_diff_eq!(norm(&(&s.x - &next.x)), 0.000023, epsilon = 1e-12);
        let zero = OptimizerState::new(array![0.0, 0.0], 1.0, 0.0).unwrap();
        assert_eq!(clipped_step(&zero, &q, 1.0, &mut rng, 1).unwrap().x, zero.x);
        assert!(clipped_step(&zero, &q, 0.0, &mut rng, 1).is_err());
    }

    #[test]
    fn run_selfcal_single_step_hits_minimiser() {
        let p = Noiseless(SelfCalibratedCosh::new(1).unwrap());
        let cfg = RunConfig::new(Method::Npgm, 1.0, 1);
        let trace = run(&p, &cosh(), &cfg, array![1.0], 0).unwrap();
        assert_eq!(trace.records.len(), 2);
        assert_eq!(trace.final_state.x[0], 0.0);
        assert_eq!(trace.final_value(), 0.0);
        assert!(trace.abort.is_none());
    }

    #[test]
    fn run_record_cadence() {
        let p = Noiseless(SelfCalibratedCosh::new(2).unwrap());
        let cfg = RunConfig::new(Method::Mnpgm, 0.5, 25).with_beta(0.2);
        let trace = run(&p, &cosh(), &cfg, array![1.0, 2.0], 0).unwrap();
        assert_eq!(trace.records.len(), 26);
        assert!(trace.records.windows(2).all(|w| w[1].k == w[0].k + 1));
        let sparse = cfg.clone().with_eval_every(10);
        let trace = run(&p, &cosh(), &sparse, array![1.0, 2.0], 0).unwrap();
        let ks: Vec<_> = trace.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 10, 20, 25]);
        assert!(trace.records.iter().all(|r| r.lyapunov.is_some() && r.elapsed_ns.is_none()));
    }

    #[test]
    fn run_rejects_bad_config() {
        let p = Noiseless(Quadratic::new(1).unwrap());
        let r = cosh();
        assert_eq!(
            run(&p, &r, &RunConfig::new(Method::Gd, 1.0, 0), array![1.0], 0),
            Err(RunError::NoIterations)
        );
        let bad = RunConfig::new(Method::Gdm, 1.0, 3).with_beta(1.5);
        assert!(matches!(
            run(&p, &r, &bad, array![1.0], 0),
            Err(RunError::Step(StepError::InvalidMomentum(_)))
        ));
    }

    #[test]
    fn run_aborts_on_divergence() {
        // gradient descent on ½x² with γ = 3 multiplies x by -2 each step
        let p = Noiseless(Quadratic::new(1).unwrap());
        let cfg = RunConfig::new(Method::Gd, 3.0, 1000);
        let trace = run(&p, &cosh(), &cfg, array![1.0], 0).unwrap();
        assert!(trace.abort.as_deref().unwrap().contains("diverged"));
        assert!(trace.records.len() < 100);
        assert!(trace.records.last().unwrap().f > 1e12);
    }

    #[test]
    fn full_batch_stochastic_matches_deterministic() {
        let p = PhaseRetrieval::generate(12, 6, 3).unwrap();
        let r = cosh().with_scale(1000.0).unwrap();
        let x0 = seeded_initial_point(&p, 4, 1.0);
        let det = run(&p, &r, &RunConfig::new(Method::Npgm, 1e-3, 30), x0.clone(), 4).unwrap();
        let sto = RunConfig::new(Method::Snpgm, 1e-3, 30).with_batch(6).with_eval_every(1);
        let sto = run(&p, &r, &sto, x0, 9).unwrap();
        assert_eq!(det.records, sto.records);
    }

    #[test]
    fn csv_layout() {
        let records = vec![
            Record {
                k: 0,
                f: 1.5,
                grad_norm: 2.0,
                stationarity: 0.25,
                lyapunov: None,
                elapsed_ns: None,
            },
            Record {
                k: 1,
                f: 0.1,
                grad_norm: 0.0,
                stationarity: 0.0,
                lyapunov: Some(0.1),
                elapsed_ns: Some(42),
            },
        ];
        let csv = trace_to_csv(&records);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "0,1.5000000000000000e0,2.0000000000000000e0,2.5000000000000000e-1,,"
        );
        assert!(lines[2].ends_with(",1.0000000000000001e-1,42"));
        for line in &lines[1..] {
            let f: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(f.is_finite());
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("adam".parse::<Method>().is_err());
    }
}
