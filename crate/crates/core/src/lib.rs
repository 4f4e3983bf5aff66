//! Numerical laboratory for generalized Loewner theory on the unit disc.

pub mod boundary;
pub mod chains;
pub mod disc;
pub mod error;
pub mod evolution;
pub mod extrapolate;
pub mod herglotz;
pub mod ode;
pub mod plot;
#[cfg(test)]
mod properties;
pub mod quad;
pub mod scenario;
pub mod semigroup;
pub mod trace;

pub use error::{Error, Result};
