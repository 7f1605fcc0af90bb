//! Mean-field, fluctuation and microscopic simulations of permutation-invariant
//! dissipative spin-1/2 systems.

pub mod algebra;
pub mod error;
pub mod fockstat;
pub mod linalg;
pub mod macroflow;
pub mod mesoflow;
pub mod microsim;
pub mod ode;
pub mod sampling;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
