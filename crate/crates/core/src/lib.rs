//! Coupled-cavity simulation: linear-response modes, cable elimination,
//! photon-lifetime analysis and a truncated-Fock master equation.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod phase;

pub use error::{Error, Result};
