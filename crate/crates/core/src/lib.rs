//! Minimal rank-1 decompositions of partially symmetric tensors.

pub mod algebra;
pub mod cli;
pub mod decompose;
pub mod eigen;
pub mod error;
pub mod extension;
pub mod io;
pub mod linalg;
pub mod moment;

pub use error::{Error, Result};
