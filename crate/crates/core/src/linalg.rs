//! Small dense-vector helpers shared across modules.

use ndarray::{ArrayView1, AsArray, Ix1};

/// Euclidean norm that does not overflow for components beyond `1e154`.
pub fn norm<'a>(x: impl AsArray<'a, f64, Ix1>) -> f64 {
    let x: ArrayView1<'a, f64> = x.into();
    let sq: f64 = x.iter().map(|v| v * v).sum();
    if sq.is_finite() && sq > 1e-280 {
        return sq.sqrt();
    }
    let big = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if big == 0.0 || !big.is_finite() {
        return big;
    }
    let scaled: f64 = x.iter().map(|v| (v / big) * (v / big)).sum();
    big * scaled.sqrt()
}

/// Euclidean distance `‖a - b‖`.
pub fn distance<'a, 'b>(a: impl AsArray<'a, f64, Ix1>, b: impl AsArray<'b, f64, Ix1>) -> f64 {
    let (a, b): (ArrayView1<'a, f64>, ArrayView1<'b, f64>) = (a.into(), b.into());
    norm(&(&a - &b))
}
