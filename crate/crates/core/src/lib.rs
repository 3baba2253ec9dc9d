//! Simulation kernels for electrons bound to levitated solid-neon spheres.

pub mod constants;
pub mod coupling;
pub mod eigensolver;
pub mod error;
pub mod laplace;
pub mod linalg;
pub mod maglev;
pub mod numerics;
pub mod qubit;
pub mod ringfield;
pub mod special;
pub mod vertical;

pub use error::{Error, Result};
