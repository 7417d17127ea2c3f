//! Counterdiabatic optimised local driving.
//!
//! Variational local counterdiabatic (LCD) drives for time-dependent spin and
//! lattice Hamiltonians, auxiliary control pulses optimised with gradient-free
//! methods, and the desk-scale benchmark protocols built on top of them.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod lcd;
pub mod models;
pub mod optimize;
pub mod pauli;
pub mod pulses;
pub mod schedule;
pub mod spline;

pub use error::{ColdError, Result};
