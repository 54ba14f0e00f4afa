use thiserror::Error;

/// Failures raised by the loop-group kernels.
///
/// Each variant corresponds to a distinct numerical or contractual failure so
/// that callers (notably the CLI) can map them onto stable exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncation discarded tail mass {mass:.3e} (tolerance {tol:.3e})")]
    TailLoss { mass: f64, tol: f64 },

    #[error("spectral content beyond degree {degree}: tail {tail:.3e} exceeds {tol:.3e}")]
    Alias { degree: usize, tail: f64, tol: f64 },

    #[error("loop is not invertible on the circle grid (min |det| = {min_det:.3e})")]
    SingularInput { min_det: f64 },

    #[error("factorization did not converge: residual {residual:.3e} with {blocks} blocks")]
    NoConvergence { residual: f64, blocks: usize },

    #[error("loop is numerically outside the big cell (condition number {conditioning:.3e})")]
    OutsideBigCell { conditioning: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("resonant divisor at order {k}: |divisor| = {divisor:.3e}")]
    Resonant { k: usize, divisor: f64 },

    #[error("point {z} lies on the branch cut")]
    OnBranchCut { z: String },

    #[error("point {z} lies outside the domain of the potential")]
    OutOfDomain { z: String },

    #[error("integration path passes through a pole at {pole}")]
    PoleOnPath { pole: String },

    #[error("ODE step size underflow at parameter {at:.6}")]
    StepUnderflow { at: f64 },

    #[error("sample {index} has no complete finite-difference stencil")]
    BoundarySample { index: usize },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
