//! Linearized BGK phonon transport, its adjoint, and relaxation-time
//! reconstruction from boundary temperature measurements.

pub mod cli;
pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod inverse;
pub mod material;
pub mod optimize;
pub mod transport;

pub use error::{Error, Result};
