//! Simulation of dissipative dark-state preparation in driven Rydberg
//! ensembles: model parameters, Hilbert spaces, Lindblad dynamics, steady
//! states and the scenario runs built on them.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod observables;
pub mod scenarios;
pub mod operators;

pub use error::{Error, Result};
