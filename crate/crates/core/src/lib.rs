//! Value iteration and policy iteration for the discrete-time linear
//! quadratic regulator, exact and with per-iteration model estimates, plus
//! instruments that measure their convergence regions, contraction rates
//! and robustness to model error.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod inexact;
pub mod lqr;
pub mod matlin;
pub mod oracle;
pub mod sampling;
pub mod solvers;
pub mod tolerances;

pub use error::{LqrError, Result};
