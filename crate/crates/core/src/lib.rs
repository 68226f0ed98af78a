//! Core library: linear algebra kernels, matrix group models, lattice
//! reduction into Siegel coordinates, measure-ratio certification of
//! well-rounded sets, certificate algebra, and lattice point counting.

pub mod calculus;
pub mod certifier;
pub mod counting;
pub mod error;
pub mod group;
pub mod intmat;
pub mod io;
pub mod lattice;
pub mod matrix;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::Matrix;
