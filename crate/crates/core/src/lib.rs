//! Twisted loop-group kernels for minimal Lagrangian Delaunay cylinders in CP²
//! and their perturbations: Wiener-normed loops, Iwasawa and Birkhoff
//! splittings, potentials, the series solution near the puncture, frames,
//! geometry, monodromy and residual checks.

// `!(x > 0.0)` guards are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod factorization;
pub mod loops;
pub mod ode;
pub mod pipeline;
pub mod potentials;
pub mod verification;
pub mod zap;

pub use error::{Error, Result};
