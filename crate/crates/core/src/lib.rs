//! Quantum functional bootstrapping and quantum-assisted PIR, simulated on a
//! sparse statevector with real LWE, GSW and Paillier arithmetic underneath.

pub mod blindrot;
pub mod bootstrap;
pub mod config;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod paillier;
pub mod pir;
pub mod qfhe;
pub mod qsim;
pub mod resources;

pub use error::{Error, Result};
