pub mod cli;
pub mod error;
pub mod fastlayer;
pub mod hamiltonian;
pub mod hjb;
pub mod levy;
pub mod mc;
pub mod model;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};
