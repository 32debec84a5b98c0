//! Solvers for parabolic economic optimal control problems with regularized
//! pointwise state constraints on `(-1, 1)`.
//!
//! * [`newton`]: monolithic semismooth Newton on the discrete optimality
//!   system.
//! * [`wrm`]: nonlinear preconditioning by an overlapping two-subdomain
//!   waveform relaxation with Robin transmission conditions, solved by a
//!   generalized Newton method with matrix-free GMRES.
//! * [`experiment`]: built-in test cases, parameter sweeps and CSV output.

pub mod discretize;
pub mod experiment;
pub mod error;
pub mod exec;
pub mod kkt;
pub mod krylov;
pub mod model;
pub mod newton;
mod report;
pub mod wrm;

pub use error::{Error, Result};
pub use report::IterationReport;
