//! Vortex-lattice solutions of the static Zhang-Hansen-Kivelson Chern-Simons
//! equations on a fundamental lattice cell.

pub mod bifurcation;
pub mod energy;
pub mod error;
pub mod fields;
pub mod landau;
pub mod lattice;
pub mod operators;
pub mod verify;

pub use error::{Error, Result};
