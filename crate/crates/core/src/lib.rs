//! Toolkit for noisy sub-national epidemic curves.
//!
//! The crate covers three loosely coupled stages:
//!
//! * [`dsp`] smooths a daily-case curve with a zero-phase first-order
//!   Butterworth low-pass filter whose cutoff is picked per curve by
//!   maximizing an information-retention plus noise-removal objective.
//! * [`alerts`] turns incidence into low- and high-inertia alert levels and
//!   counts level flapping ("spikes").
//! * [`forecaster`] and [`evaluation`] train a from-scratch LSTM on
//!   50-day windows to forecast the next 10 days, under plain MSE or a
//!   density-weighted loss, and score the four raw/smoothed x MSE/adaptive
//!   method combinations.
//!
//! [`epidata`] handles CSV ingestion and windowing, and [`synth`] generates
//! seeded multi-wave curves with periodic-testing artifacts.

pub mod alerts;
pub mod dsp;
pub mod epidata;
pub mod error;
pub mod evaluation;
pub mod forecaster;
pub mod synth;

pub use error::{Error, Result};

/// Days of history fed to the forecaster.
pub const INPUT_DAYS: usize = 50;
/// Days forecast per window.
pub const HORIZON_DAYS: usize = 10;
