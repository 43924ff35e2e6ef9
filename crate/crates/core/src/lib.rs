//! Simulation and analysis toolkit for dual-frequency multiplexed NV-ensemble
//! magnetometry and thermometry.

pub mod config;
pub mod error;
pub mod io;
pub mod lineshape;
pub mod multiplex;
pub mod pipeline;
pub mod signal;
pub mod spectral;
pub mod spin;
pub mod trace;

pub use error::{Error, Result};
pub use trace::{TimeTrace, Unit};
