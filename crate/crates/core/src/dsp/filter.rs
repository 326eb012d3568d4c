use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nyquist frequency for daily sampling, in cycles/day.
pub const NYQUIST: f64 = 0.5;

/// First-order Butterworth low-pass, parameterized by its -3 dB cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    cutoff: f64,
}

impl FilterSpec {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff <= NYQUIST) {
            return Err(Error::InvalidInput(format!("cutoff {cutoff} outside (0, {NYQUIST}] cycles/day")));
        }
        Ok(FilterSpec { cutoff })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn order(&self) -> u32 {
        1
    }
}

/// Magnitude response `1 / sqrt(1 + (f / fc)^2)`.
pub fn butterworth_gain(spec: FilterSpec, frequency: f64) -> f64 {
    let ratio = frequency / spec.cutoff;
    1.0 / (1.0 + ratio * ratio).sqrt()
}

/// Spectrum of the even-symmetric extension `x0..x(L-1), x(L-1)..x0`.
///
/// Computed once per signal so that a cutoff sweep only pays for one
/// inverse transform per candidate.
pub struct MirrorSpectrum {
    len: usize,
    spectrum: Vec<Complex<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl MirrorSpectrum {
    pub fn new(values: &[f64]) -> Result<Self> {
        let len = values.len();
        if len < 4 {
            return Err(Error::InvalidInput(format!("filtering needs >= 4 values, got {len}")));
        }
        let mut spectrum: Vec<Complex<f64>> =
            values.iter().chain(values.iter().rev()).map(|&v| Complex::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(2 * len).process(&mut spectrum);
        let inverse = planner.plan_fft_inverse(2 * len);
        Ok(MirrorSpectrum { len, spectrum, inverse })
    }

    /// Linear (unclamped) zero-phase filter output.
    pub fn filter(&self, spec: FilterSpec) -> Vec<f64> {
        let n = 2 * self.len;
        let mut buf: Vec<Complex<f64>> = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(k, z)| {
                let f = k.min(n - k) as f64 / n as f64;
                z * butterworth_gain(spec, f)
            })
            .collect();
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf[..self.len].iter().map(|z| z.re * scale).collect()
    }
}

/// Zero-phase filtering without the non-negativity clamp; linear in `values`.
pub fn zero_phase_filter_linear(values: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    Ok(MirrorSpectrum::new(values)?.filter(spec))
}

/// Zero-phase first-order Butterworth smoothing, clamped at 0.
pub fn zero_phase_filter(values: &[f64], spec: FilterSpec) -> Result<Vec<f64>> {
    let mut out = zero_phase_filter_linear(values, spec)?;
    clamp_non_negative(&mut out);
    Ok(out)
}

pub(crate) fn clamp_non_negative(values: &mut [f64]) {
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
}

/// Trailing mean over the last `n` days (fewer at the start of the series).
///
/// # Panics
/// If `n == 0`.
pub fn n_day_average(values: &[f64], n: usize) -> Vec<f64> {
    assert!(n >= 1, "window must be at least one day");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (t, &v) in values.iter().enumerate() {
        sum += v;
        if t >= n {
            sum -= values[t - n];
        }
        out.push(sum / (t + 1).min(n) as f64);
    }
    out
}
