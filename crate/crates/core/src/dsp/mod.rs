//! Spectral analysis, zero-phase Butterworth smoothing and per-curve
//! cutoff optimization.

mod filter;
mod objective;
mod spectrum;

pub use filter::{
    butterworth_gain, n_day_average, zero_phase_filter, zero_phase_filter_linear, FilterSpec, MirrorSpectrum, NYQUIST,
};
pub use objective::{
    cutoff_grid, j_psd, j_r, objective, objective_curve, optimize_cutoff, pearson, FilterResult, GridPoint,
    ObjectiveParams, ObjectiveValue,
};
pub use spectrum::{autocorrelation, periodogram, PowerSpectrum};
