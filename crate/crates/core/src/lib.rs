//! Sensitivity forecasts for single trapped electrons and ions used as
//! impulse detectors for ambient charged particles.

// `!(x > 0.0)` is how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod kinematics;
pub mod ode;
pub mod output;
pub mod quad;
pub mod rate;
pub mod sensitivity;
pub mod species;
pub mod tof;
pub mod trap;
pub mod units;
pub mod validate;
pub mod velocity;

pub use error::{Error, Result};
