//! Numerical audits of Bernstein-type inequalities for discretized 1D
//! Schrödinger and divergence-form operators.

pub mod bernstein;
pub mod calculus;
pub mod error;
pub mod kernels;
pub mod models;
pub mod numerics;
pub mod sweep;

pub use error::{LabError, Result};
