//! Microring photon-pair sources: rate model, time-tag simulation and
//! coincidence analysis.
//!
//! - [`resonator`]: pair generation rate, linewidth, FSR, brightness, transmission dips
//! - [`eventsim`]: Monte Carlo detector streams
//! - [`tcspc`]: histograms, CAR, singles, heralded g²
//! - [`franson`]: folded Franson interferometer and visibility
//! - [`fitting`]: Lorentzian, power-law and sinusoid fits
//! - [`timetag`]: the text time-tag file format

// `!(x > 0.0)` is used on purpose so NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod eventsim;
pub mod fitting;
pub mod franson;
pub mod resonator;
pub mod rng;
pub mod tcspc;
pub mod timetag;

pub use error::{Error, Result};

/// Speed of light in vacuum [m s⁻¹].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
