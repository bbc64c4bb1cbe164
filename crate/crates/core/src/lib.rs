//! Numerical laboratory for multiphase weakly nonlinear geometric optics of
//! nonlinear Schrödinger equations with local and non-local (Davey-Stewartson,
//! dipolar) nonlinearities.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod norms;
pub mod resonance;
pub mod solver;
pub mod transport;

pub use error::{ConfigCode, Error, Result};
