//! Coupled, semi-decoupled and decoupled impedance models of grid-connected
//! converters in the dq and modified sequence domains, with time-domain
//! identification and Nyquist-based stability assessment.

pub mod error;
pub mod freqresp;
pub mod domains;
pub mod params;
pub mod models;
pub mod stability;
pub mod timesim;
pub mod extraction;
pub mod config;
pub mod report;
pub mod cli;

pub use error::{Error, Result};
