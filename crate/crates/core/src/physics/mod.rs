//! Constants, dielectric models and reflection coefficients.

pub mod constants;
pub mod material;

pub use constants::PhysicalConstants;
pub use material::{MaterialModel, MatsubaraGrid, PermittivityTable};
