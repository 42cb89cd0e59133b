use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("size {requested} exceeds the enumeration cap {cap}")]
    BoundedResource { requested: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sequence length mismatch: need {needed}, have {available}")]
    LengthMismatch { needed: usize, available: usize },

    #[error("support solver did not converge (s = {s}, t = {t}, residuals {residual1:e}, {residual2:e})")]
    SolverNonConvergence {
        s: f64,
        t: f64,
        residual1: f64,
        residual2: f64,
    },

    #[error("singularity at z = {z}: {what}")]
    Singularity { z: Complex64, what: &'static str },

    #[error("quadrature did not stabilize: {0}")]
    Quadrature(String),

    #[error("Newton continuation failed at z = {z} (last iterate {last}, residual {residual:e})")]
    Continuation {
        z: Complex64,
        last: Complex64,
        residual: f64,
    },

    #[error("Stieltjes inversion unstable at t = {t}: {detail}")]
    InversionUnstable { t: f64, detail: String },

    #[error("ill-conditioned matrix (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
