//! Configuration-driven runner and verifier for nonlinearly preconditioned
//! gradient methods.

pub mod commands;
pub mod config;
pub mod verify;

use serde_json::{Number, Value};

/// JSON number carrying 17 significant digits; non-finite values become `null`.
pub fn json_number(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(format!("{v:.16e}").parse::<Number>().expect("valid float literal"))
    } else {
        Value::Null
    }
}
