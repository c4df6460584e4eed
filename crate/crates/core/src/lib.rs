//! Nonlinearly preconditioned gradient methods: reference-function kernels,
//! test problems, optimizers and certificate checks.

pub mod analysis;
pub mod kernels;
pub mod linalg;
pub mod optimizers;
pub mod problems;
