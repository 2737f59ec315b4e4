//! Kinetic and fluid solvers for the BGK equation coupled through
//! half-space Knudsen-layer problems.

pub mod acoustic_solver;
pub mod coupling;
pub mod error;
pub mod euler_solver;
pub mod halfspace_basis;
pub mod halfspace_solver;
pub mod harness;
pub mod kinetic_solver;
pub mod linearization;
pub mod phase_grid;

pub use error::{Error, Result};
