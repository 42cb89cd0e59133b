//! Numerics for the free Generalized Inverse Gaussian (fGIG) and
//! Marchenko–Pastur laws, together with a random-matrix harness that checks
//! the free Matsumoto–Yor property and its regression characterization.
//!
//! Layout:
//!
//! - [`combinatorics`]: non-crossing partitions and moment/free-cumulant
//!   conversion, including mixed cumulants with one inverse argument.
//! - [`distributions`]: parameter records, support solver, densities and
//!   closed-form Cauchy/R-transforms.
//! - [`transforms`]: Stieltjes inversion, free additive convolution through
//!   R-transforms, truncated power series.
//! - [`rmt`]: finite-N Wishart, Haar and fGIG-spectrum ensembles plus spectral
//!   statistics.
//! - [`experiments`]: end-to-end checks producing [`experiments::ExperimentReport`]s.
//! - [`cli`]: configuration and artifact emission for the `freegig` binary.


pub mod cli;
pub mod combinatorics;
pub mod distributions;
mod error;
pub mod experiments;
pub mod quadrature;
pub mod rmt;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
