//! Discrete copula arrays for contingency tables.

pub mod asymptotics;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod numerics;
pub mod param_basis;
pub mod projection;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
