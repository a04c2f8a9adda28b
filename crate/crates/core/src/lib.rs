//! Discrete energies, limiting cell formulas and convergence studies for a
//! thin rod of atoms on a cubic lattice.

pub mod assumptions;
pub mod config;
pub mod crack;
pub mod descent;
pub mod elastic;
pub mod energy;
pub mod error;
pub mod frame;
pub mod generators;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod potentials;
pub mod study;

pub use error::{Error, Result};
