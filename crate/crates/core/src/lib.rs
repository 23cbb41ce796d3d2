//! Free-fermion simulation of transverse-field Ising chains driven by a
//! moving field front.

pub mod disorder;
pub mod dynamics;
pub mod ed;
pub mod error;
pub mod linalg;
pub mod majorana;
pub mod observables;
pub mod oracle;
pub mod profile;
pub mod quench;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
