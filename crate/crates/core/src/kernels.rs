//! Scalar kernels `h` and the reference functions `φ` built from them.
//!
//! A kernel is an even, strictly convex scalar function with `h(0) = 0`.
//! Composing it with the Euclidean norm gives an isotropic reference
//! function `φ(x) = λ h(‖x‖)`; summing it over coordinates gives a separable
//! one `φ(x) = λ Σ h(x_i)`. The gradient of the convex conjugate, `∇φ*`, is
//! the nonlinear preconditioner applied to gradients by the optimizers.
//!
//! | kernel        | `h(t)`                    | `h*'(s)`          |
//! |---------------|---------------------------|-------------------|
//! | `quadratic`   | `t²/2`                    | `s`               |
//! | `cosh`        | `cosh(t) - 1`             | `arsinh(s)`       |
//! | `log_barrier` | `ε(-|t| - ln(1 - |t|))`   | `s / (ε + |s|)`   |
//! | `circular`    | `1 - √(1 - t²)`           | `s / √(1 + s²)`   |

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, AsArray, Ix1};
use thiserror::Error;

use crate::linalg::norm;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("unknown kernel `{0}` (expected one of quadratic, cosh, log_barrier, circular)")]
    UnknownKernel(String),
    #[error("unknown shape `{0}` (expected isotropic or separable)")]
    UnknownShape(String),
    #[error("kernel parameter `{name}` must be positive and finite, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("kernel `{kernel}` expects {expected} parameter(s), got {got}")]
    ParameterCount {
        kernel: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("argument of magnitude {magnitude} is outside the kernel domain (radius {radius})")]
    OutOfDomain { magnitude: f64, radius: f64 },
}

/// A scalar kernel together with its exact convex conjugate.
///
/// Implementors must be even, strictly convex on their domain, vanish at the
/// origin and satisfy `conj_deriv(deriv(t)) == t`.
pub trait ScalarKernel: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;

    /// `h` is finite on the open interval `(-r, r)`; `f64::INFINITY` for full domain.
    fn domain_radius(&self) -> f64;

    fn in_domain(&self, t: f64) -> bool {
        t.abs() < self.domain_radius()
    }

    fn value(&self, t: f64) -> f64;

    fn deriv(&self, t: f64) -> f64;

    /// Convex conjugate `h*(s)`.
    fn conj(&self, s: f64) -> f64;

    /// `h*'(s)`, the functional inverse of [`ScalarKernel::deriv`].
    fn conj_deriv(&self, s: f64) -> f64;

    /// `h*'(s) / s`, continuously extended to `s = 0`.
    ///
    /// The isotropic preconditioner is `y ↦ ratio(‖y‖)·y`, which avoids
    /// dividing by the norm and makes the zero gradient map to zero.
    fn conj_deriv_ratio(&self, s: f64) -> f64 {
        if s == 0.0 {
            let probe = 1e-8;
            self.conj_deriv(probe) / probe
        } else {
            self.conj_deriv(s) / s
        }
    }

    /// `h(h*'(s))`. Kernels override this with a closed form that stays
    /// finite when `h*'(s)` rounds onto the domain boundary.
    fn value_at_conj_deriv(&self, s: f64) -> f64 {
        self.value(self.conj_deriv(s))
    }

    /// Lower bound on `h''` over the domain.
    fn strong_convexity(&self) -> f64;

    /// Whether `h(θt) ≤ θ² h(t)` for all `θ ∈ [0, 1]`.
    fn two_subhomogeneous(&self) -> bool;
}

/// The four shipped kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Quadratic,
    Cosh,
    LogBarrier { eps: f64 },
    Circular,
}

impl Kernel {
    pub fn log_barrier(eps: f64) -> Result<Self, KernelError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "eps",
                value: eps,
            });
        }
        Ok(Kernel::LogBarrier { eps })
    }

    /// Builds a kernel from its name and positional parameters
    /// (`log_barrier` takes `[ε]`, the others take none).
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self, KernelError> {
        let expect = |kernel: &'static str, expected: usize| {
            if params.len() == expected {
                Ok(())
            } else {
                Err(KernelError::ParameterCount {
                    kernel,
                    expected,
                    got: params.len(),
                })
            }
        };
        match name {
            "quadratic" => expect("quadratic", 0).map(|_| Kernel::Quadratic),
            "cosh" => expect("cosh", 0).map(|_| Kernel::Cosh),
            "circular" => expect("circular", 0).map(|_| Kernel::Circular),
            "log_barrier" => {
                expect("log_barrier", 1)?;
                Kernel::log_barrier(params[0])
            }
            other => Err(KernelError::UnknownKernel(other.to_string())),
        }
    }

    /// Curvature upper bound `L_φ`, finite only for the quadratic kernel.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Kernel::Quadratic => Some(1.0),
            _ => None,
        }
    }
}

impl ScalarKernel for Kernel {
    fn name(&self) -> &str {
        match self {
            Kernel::Quadratic => "quadratic",
            Kernel::Cosh => "cosh",
            Kernel::LogBarrier { .. } => "log_barrier",
            Kernel::Circular => "circular",
        }
    }

    fn domain_radius(&self) -> f64 {
        match self {
            Kernel::Quadratic | Kernel::Cosh => f64::INFINITY,
            Kernel::LogBarrier { .. } | Kernel::Circular => 1.0,
        }
    }

    fn in_domain(&self, t: f64) -> bool {
        match self {
            // 1 - √(1 - t²) is finite on the closed interval
            Kernel::Circular => t.abs() <= 1.0,
            _ => t.abs() < self.domain_radius(),
        }
    }

    fn value(&self, t: f64) -> f64 {
        match *self {
            Kernel::Quadratic => 0.5 * t * t,
            Kernel::Cosh => {
                let s = (0.5 * t).sinh();
                2.0 * s * s
            }
            Kernel::LogBarrier { eps } => {
                let a = t.abs();
                eps * (-a - (-a).ln_1p())
            }
            Kernel::Circular => t * t / (1.0 + (1.0 - t * t).sqrt()),
        }
    }

    fn deriv(&self, t: f64) -> f64 {
        match *self {
            Kernel::Quadratic => t,
            Kernel::Cosh => t.sinh(),
            Kernel::LogBarrier { eps } => eps * t / (1.0 - t.abs()),
            Kernel::Circular => t / (1.0 - t * t).sqrt(),
        }
    }

    fn conj(&self, s: f64) -> f64 {
        match *self {
            Kernel::Quadratic => 0.5 * s * s,
            Kernel::Cosh => {
                let a = s.abs();
                // s·arsinh(s) - (√(1+s²) - 1), rewritten to avoid cancellation
                a * a.asinh() - a * (a / (1.0f64.hypot(a) + 1.0))
            }
            Kernel::LogBarrier { eps } => {
                let a = s.abs();
                a - eps * (a / eps).ln_1p()
            }
            Kernel::Circular => {
                let a = s.abs();
                a * (a / (1.0f64.hypot(a) + 1.0))
            }
        }
    }

    fn conj_deriv(&self, s: f64) -> f64 {
        match *self {
            Kernel::Quadratic => s,
            Kernel::Cosh => s.asinh(),
            Kernel::LogBarrier { eps } => s / (eps + s.abs()),
            Kernel::Circular => s / 1.0f64.hypot(s),
        }
    }

    fn conj_deriv_ratio(&self, s: f64) -> f64 {
        match *self {
            Kernel::Quadratic => 1.0,
            Kernel::Cosh => {
                if s == 0.0 {
                    1.0
                } else {
                    s.asinh() / s
                }
            }
            Kernel::LogBarrier { eps } => 1.0 / (eps + s.abs()),
            Kernel::Circular => 1.0 / 1.0f64.hypot(s),
        }
    }

    fn value_at_conj_deriv(&self, s: f64) -> f64 {
        let a = s.abs();
        match *self {
            Kernel::Quadratic => 0.5 * s * s,
            // √(1+s²) - 1
            Kernel::Cosh => a * (a / (1.0f64.hypot(a) + 1.0)),
            Kernel::LogBarrier { eps } => {
                let t = a / (eps + a);
                eps * ((a / eps).ln_1p() - t)
            }
            // 1 - 1/√(1+s²)
            Kernel::Circular => {
                let r = 1.0f64.hypot(a);
                (a / (r + 1.0)) * (a / r)
            }
        }
    }

    fn strong_convexity(&self) -> f64 {
        match *self {
            Kernel::Quadratic | Kernel::Cosh | Kernel::Circular => 1.0,
            Kernel::LogBarrier { eps } => eps,
        }
    }

    fn two_subhomogeneous(&self) -> bool {
        true
    }
}

/// How a kernel is lifted from scalars to vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `h(‖x‖)`
    Isotropic,
    /// `Σ h(x_i)`
    Separable,
}

impl FromStr for Shape {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "isotropic" => Ok(Shape::Isotropic),
            "separable" => Ok(Shape::Separable),
            other => Err(KernelError::UnknownShape(other.to_string())),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Shape::Isotropic => "isotropic",
            Shape::Separable => "separable",
        })
    }
}

/// `φ = λ·(h∘‖·‖)` or `φ = λ·Σ h(x_i)`.
///
/// Immutable after construction and cheap to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFunction<K = Kernel> {
    kernel: K,
    shape: Shape,
    scale: f64,
}

impl ReferenceFunction<Kernel> {
    pub fn isotropic(kernel: Kernel) -> Self {
        Self {
            kernel,
            shape: Shape::Isotropic,
            scale: 1.0,
        }
    }

    pub fn separable(kernel: Kernel) -> Self {
        Self {
            kernel,
            shape: Shape::Separable,
            scale: 1.0,
        }
    }
}

impl<K: ScalarKernel> ReferenceFunction<K> {
    pub fn new(kernel: K, shape: Shape, scale: f64) -> Result<Self, KernelError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(KernelError::InvalidScale(scale));
        }
        Ok(Self {
            kernel,
            shape,
            scale,
        })
    }

    pub fn with_scale(self, scale: f64) -> Result<Self, KernelError> {
        Self::new(self.kernel, self.shape, scale)
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Strong convexity modulus of `φ` (kernel modulus times `λ`).
    pub fn strong_convexity(&self) -> f64 {
        self.scale * self.kernel.strong_convexity()
    }

    pub fn in_domain<'a>(&self, x: impl AsArray<'a, f64, Ix1>) -> bool {
        let x = x.into();
        match self.shape {
            Shape::Isotropic => self.kernel.in_domain(norm(x)),
            Shape::Separable => x.iter().all(|&v| self.kernel.in_domain(v)),
        }
    }

    fn domain_error(&self, x: ArrayView1<'_, f64>) -> KernelError {
        let magnitude = match self.shape {
            Shape::Isotropic => norm(x),
            Shape::Separable => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        };
        KernelError::OutOfDomain {
            magnitude,
            radius: self.kernel.domain_radius(),
        }
    }

    /// `φ(x)`; errors instead of returning `+∞` outside the domain.
    pub fn value<'a>(&self, x: impl AsArray<'a, f64, Ix1>) -> Result<f64, KernelError> {
        let x = x.into();
        if !self.in_domain(x) {
            return Err(self.domain_error(x));
        }
        let raw = match self.shape {
            Shape::Isotropic => self.kernel.value(norm(x)),
            Shape::Separable => x.iter().map(|&v| self.kernel.value(v)).sum(),
        };
        Ok(self.scale * raw)
    }

    /// `∇φ(x)`, defined on the interior of the domain.
    pub fn gradient<'a>(&self, x: impl AsArray<'a, f64, Ix1>) -> Result<Array1<f64>, KernelError> {
        let x = x.into();
        let interior = match self.shape {
            Shape::Isotropic => norm(x) < self.kernel.domain_radius(),
            Shape::Separable => x.iter().all(|v| v.abs() < self.kernel.domain_radius()),
        };
        if !interior {
            return Err(self.domain_error(x));
        }
        let g = match self.shape {
            Shape::Isotropic => {
                let r = norm(x);
                if r == 0.0 {
                    Array1::zeros(x.len())
                } else {
                    let factor = self.scale * self.kernel.deriv(r) / r;
                    x.mapv(|v| v * factor)
                }
            }
            Shape::Separable => x.mapv(|v| self.scale * self.kernel.deriv(v)),
        };
        Ok(g)
    }

    /// `φ*(y) = λ ψ*(y/λ)`, finite everywhere for the shipped kernels.
    pub fn conjugate<'a>(&self, y: impl AsArray<'a, f64, Ix1>) -> f64 {
        let y = y.into();
        let lam = self.scale;
        let raw = match self.shape {
            Shape::Isotropic => self.kernel.conj(norm(y) / lam),
            Shape::Separable => y.iter().map(|&v| self.kernel.conj(v / lam)).sum(),
        };
        lam * raw
    }

    /// The preconditioner `∇φ*(y)`.
    ///
    /// Isotropic: `h*'(‖y‖/λ)·y/‖y‖`, with the zero vector at `y = 0`.
    /// Separable: `h*'(y_i/λ)` per coordinate.
    pub fn precondition<'a>(&self, y: impl AsArray<'a, f64, Ix1>) -> Array1<f64> {
        let y = y.into();
        let lam = self.scale;
        match self.shape {
            Shape::Isotropic => {
                let factor = self.kernel.conj_deriv_ratio(norm(y) / lam) / lam;
                y.mapv(|v| v * factor)
            }
            Shape::Separable => y.mapv(|v| self.kernel.conj_deriv(v / lam)),
        }
    }

    /// Stationarity measure `φ(∇φ*(g))`; zero iff `g = 0`.
    pub fn stationarity<'a>(&self, g: impl AsArray<'a, f64, Ix1>) -> f64 {
        let g = g.into();
        let lam = self.scale;
        let raw = match self.shape {
            Shape::Isotropic => self.kernel.value_at_conj_deriv(norm(g) / lam),
            Shape::Separable => g
                .iter()
                .map(|&v| self.kernel.value_at_conj_deriv(v / lam))
                .sum(),
        };
        lam * raw
    }

    /// Episcaling `(c ⋆ φ)(x) = c·φ(x/c)` for `c > 0`.
    pub fn episcale_value<'a>(
        &self,
        c: f64,
        x: impl AsArray<'a, f64, Ix1>,
    ) -> Result<f64, KernelError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(KernelError::InvalidScale(c));
        }
        let x = x.into();
        let scaled = x.mapv(|v| v / c);
        Ok(c * self.value(&scaled)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    const ALL: [Kernel; 4] = [
        Kernel::Quadratic,
        Kernel::Cosh,
        Kernel::LogBarrier { eps: 1.0 },
        Kernel::Circular,
    ];

    /// sup_t { t·s - h(t) } by golden-section search over the domain.
    fn conj_by_search(h: &Kernel, s: f64) -> (f64, f64) {
        let r = h.domain_radius().min(60.0);
        let (mut lo, mut hi) = (-r * (1.0 - 1e-15), r * (1.0 - 1e-15));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let obj = |t: f64| t * s - h.value(t);
        for _ in 0..400 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if obj(a) < obj(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        let t = 0.5 * (lo + hi);
        (t, obj(t))
    }

    fn bisect_inverse(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn from_name_closed_set() {
        assert_eq!(Kernel::from_name("cosh", &[]).unwrap(), Kernel::Cosh);
        assert_eq!(
            Kernel::from_name("log_barrier", &[0.5]).unwrap(),
            Kernel::LogBarrier { eps: 0.5 }
        );
        assert!(matches!(
            Kernel::from_name("softplus", &[]),
            Err(KernelError::UnknownKernel(_))
        ));
        assert!(matches!(
            Kernel::from_name("log_barrier", &[0.0]),
            Err(KernelError::InvalidParameter { name: "eps", .. })
        ));
        assert!(matches!(
            Kernel::from_name("log_barrier", &[-1.0]),
            Err(KernelError::InvalidParameter { .. })
        ));
        assert!(matches!(
            Kernel::from_name("log_barrier", &[]),
            Err(KernelError::ParameterCount { .. })
        ));
    }

    #[test]
    fn conj_deriv_examples() {
        assert_eq!(Kernel::Cosh.conj_deriv(0.0), 0.0);
        // inverse of sinh found by bisection
        let inv = bisect_inverse(f64::sinh, 1f64.sinh(), -5.0, 5.0);
        assert_abs_diff_eq!(inv, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(Kernel::Cosh.conj_deriv(1f64.sinh()), inv, epsilon = 1e-12);
        assert_abs_diff_eq!(
            Kernel::LogBarrier { eps: 1.0 }.conj_deriv(4.0),
            0.8,
            epsilon = 1e-15
        );
        let (t_star, _) = conj_by_search(&Kernel::Circular, 1.0);
        assert_abs_diff_eq!(t_star, 0.5f64.sqrt(), epsilon = 1e-7);
        assert_abs_diff_eq!(Kernel::Circular.conj_deriv(1.0), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn conjugate_values_match_numeric_sup() {
        for h in ALL.iter().chain([Kernel::LogBarrier { eps: 0.3 }].iter()) {
            for &s in &[-7.5, -2.0, -0.3, 0.0, 0.1, 1.0, 3.0, 12.0] {
                let (_, sup) = conj_by_search(h, s);
                assert_abs_diff_eq!(h.conj(s), sup, epsilon = 1e-8 * (1.0 + sup.abs()));
            }
        }
    }

    #[test]
    fn kernel_basic_invariants() {
        for h in ALL {
            assert_eq!(h.value(0.0), 0.0);
            assert_eq!(h.deriv(0.0), 0.0);
            for &t in &[0.1, 0.5, 0.9, 0.999] {
                assert_eq!(h.value(t), h.value(-t), "{h:?} even");
                let (a, b) = (-t * 0.7, t);
                assert!(h.value(0.5 * (a + b)) < 0.5 * (h.value(a) + h.value(b)));
            }
        }
    }

    #[test]
    fn closed_form_value_at_conj_deriv_matches_composition() {
        for h in ALL {
            for &s in &[-30.0, -1.0, -1e-3, 0.0, 2e-4, 0.7, 5.0, 40.0] {
                let composed = h.value(h.conj_deriv(s));
                assert_abs_diff_eq!(
                    h.value_at_conj_deriv(s),
                    composed,
                    epsilon = 1e-12 * (1.0 + composed.abs())
                );
            }
        }
    }

    #[test]
    fn huge_arguments_stay_finite() {
        for h in ALL {
            for &s in &[1e155, -1e200, 1e300] {
                assert!(h.conj_deriv(s).is_finite());
                assert!(h.conj(s).is_finite() || h == Kernel::Quadratic);
                assert!(h.value_at_conj_deriv(s).is_finite() || h == Kernel::Quadratic);
            }
        }
        assert_abs_diff_eq!(Kernel::Cosh.conj_deriv(1e200), (2e200f64).ln(), epsilon = 1e-12);
        let r = ReferenceFunction::isotropic(Kernel::LogBarrier { eps: 1.0 });
        let s = r.stationarity(&array![1e300, 1e300]);
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn ref_value_examples() {
        let cosh_iso = ReferenceFunction::isotropic(Kernel::Cosh);
        assert_eq!(cosh_iso.value(&array![0.0, 0.0]).unwrap(), 0.0);
        let sep = ReferenceFunction::separable(Kernel::Cosh);
        let v = sep.value(&array![1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(v, 2.0 * (1f64.cosh() - 1.0), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 1.0861612696304874, epsilon = 1e-14);
        let scaled = cosh_iso.clone().with_scale(100.0).unwrap();
        let x = array![0.6, 0.8];
        assert_abs_diff_eq!(scaled.value(&x).unwrap(), 54.308063481524375, epsilon = 1e-12);
    }

    #[test]
    fn ref_value_rejects_out_of_domain() {
        let nb = ReferenceFunction::isotropic(Kernel::LogBarrier { eps: 1.0 });
        assert!(matches!(
            nb.value(&array![0.8, 0.6]),
            Err(KernelError::OutOfDomain { .. })
        ));
        let circ = ReferenceFunction::separable(Kernel::Circular);
        assert!(circ.value(&array![1.0, -1.0]).is_ok());
        assert!(circ.value(&array![1.0 + 1e-12, 0.0]).is_err());
        assert!(circ.gradient(&array![1.0, 0.0]).is_err());
    }

    #[test]
    fn precondition_examples() {
        let y = array![3.0, 4.0];
        let cosh = ReferenceFunction::isotropic(Kernel::Cosh);
        let p = cosh.precondition(&y);
        // arsinh(5) = ln(5 + √26); cross-check by inverting sinh
        let as5 = bisect_inverse(f64::sinh, 5.0, 0.0, 10.0);
        assert_abs_diff_eq!(as5, (5.0 + 26f64.sqrt()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], as5 / 5.0 * 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], as5 / 5.0 * 4.0, epsilon = 1e-12);
        // commonly quoted five-digit approximations
        assert_abs_diff_eq!(p[0], 1.38744, epsilon = 5e-5);
        assert_abs_diff_eq!(p[1], 1.84993, epsilon = 5e-5);

        let ngd = ReferenceFunction::isotropic(Kernel::LogBarrier { eps: 1.0 });
        let p = ngd.precondition(&y);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 4.0 / 6.0, epsilon = 1e-15);

        for h in ALL {
            for r in [ReferenceFunction::isotropic(h), ReferenceFunction::separable(h)] {
                let z = r.precondition(&array![0.0, 0.0, 0.0]);
                assert!(z.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn quadratic_precondition_is_identity_bitwise() {
        let y = array![0.1, -3.7, 1e-9, 12345.678];
        for r in [
            ReferenceFunction::isotropic(Kernel::Quadratic),
            ReferenceFunction::separable(Kernel::Quadratic),
        ] {
            assert_eq!(r.precondition(&y), y);
        }
    }

    #[test]
    fn precondition_output_inside_bounded_domains() {
        for h in [Kernel::LogBarrier { eps: 0.2 }, Kernel::Circular] {
            for r in [ReferenceFunction::isotropic(h), ReferenceFunction::separable(h)] {
                let u = r.precondition(&array![1e6, -3e7, 2.0]);
                assert!(r.in_domain(&u));
                assert!(r.value(&u).is_ok());
            }
        }
    }

    #[test]
    fn stationarity_examples() {
        let cosh = ReferenceFunction::isotropic(Kernel::Cosh);
        assert_eq!(cosh.stationarity(&array![0.0, 0.0]), 0.0);
        let g = array![1.0, 1.0, 1.0];
        assert_abs_diff_eq!(cosh.stationarity(&g), 1.0, epsilon = 1e-15);
        let sep = ReferenceFunction::separable(Kernel::Cosh);
        let g = array![0.0, 3f64.sqrt()];
        assert_abs_diff_eq!(sep.stationarity(&g), 1.0, epsilon = 1e-15);
        let composed = sep.value(&sep.precondition(&g)).unwrap();
        assert_abs_diff_eq!(sep.stationarity(&g), composed, epsilon = 1e-15);
        let g = array![0.3, -2.0, 4.0];
        assert_abs_diff_eq!(
            cosh.stationarity(&g),
            (1.0 + g.dot(&g)).sqrt() - 1.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn episcale_examples() {
        let cosh = ReferenceFunction::isotropic(Kernel::Cosh);
        let x = array![0.3, -0.4];
        assert_eq!(cosh.episcale_value(1.0, &x).unwrap(), cosh.value(&x).unwrap());
        let x = array![0.5];
        assert_abs_diff_eq!(
            cosh.episcale_value(0.5, &x).unwrap(),
            0.5 * (1f64.cosh() - 1.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(cosh.episcale_value(0.5, &x).unwrap(), 0.27154031740762, epsilon = 1e-12);
        let quad = ReferenceFunction::isotropic(Kernel::Quadratic);
        let x = array![1.0, 2.0, -2.0];
        for c in [0.1, 1.0, 7.5] {
            assert_abs_diff_eq!(quad.episcale_value(c, &x).unwrap(), 9.0 / (2.0 * c), epsilon = 1e-12);
        }
        assert!(cosh.episcale_value(0.0, &x).is_err());
        let nb = ReferenceFunction::isotropic(Kernel::LogBarrier { eps: 1.0 });
        assert!(nb.episcale_value(0.5, &array![0.6]).is_err());
    }

    #[test]
    fn scaled_reference_inverse_map() {
        for h in ALL {
            for shape in [Shape::Isotropic, Shape::Separable] {
                let r = ReferenceFunction::new(h, shape, 3.5).unwrap();
                let x = array![0.2, -0.35, 0.1];
                let back = r.precondition(&r.gradient(&x).unwrap());
                for (a, b) in back.iter().zip(x.iter()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                }
            }
        }
        assert!(ReferenceFunction::new(Kernel::Cosh, Shape::Isotropic, 0.0).is_err());
        assert!(ReferenceFunction::new(Kernel::Cosh, Shape::Isotropic, f64::NAN).is_err());
    }

    #[test]
    fn shape_parses() {
        assert_eq!("isotropic".parse::<Shape>().unwrap(), Shape::Isotropic);
        assert_eq!("separable".parse::<Shape>().unwrap(), Shape::Separable);
        assert!("diagonal".parse::<Shape>().is_err());
    }
}
