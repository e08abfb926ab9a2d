//! Casimir-coupled three-cantilever system: Lifshitz force tables, force
//! calibration, the reduced three-mode model, stochastic time-domain
//! simulation and spectral analysis.

pub mod calibration;
pub mod casimir;
pub mod dynamics;
pub mod error;
pub mod physics;
pub mod quadrature;
pub mod reduced;
pub mod spectral;
pub mod system;

pub use error::{Error, Result};
