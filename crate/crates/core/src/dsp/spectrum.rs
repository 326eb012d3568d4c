use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power binned onto `N` equal-width frequency bins covering [0, 0.5]
/// cycles/day. `frequencies` holds the bin centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// One-sided periodogram of the mean-removed signal, aggregated into
/// `psd_points` bins. Normalized so the bins sum to the (population)
/// variance of `values`.
pub fn periodogram(values: &[f64], psd_points: usize) -> Result<PowerSpectrum> {
    let len = values.len();
    if len < 2 {
        return Err(Error::InvalidInput(format!("periodogram needs >= 2 values, got {len}")));
    }
    if psd_points == 0 {
        return Err(Error::InvalidInput("periodogram needs at least one output bin".into()));
    }
    let mu = mean(values);
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);

    let n2 = (len * len) as f64;
    let half = len / 2;
    let mut power = vec![0.0; psd_points];
    for (k, z) in buf.iter().enumerate().take(half + 1) {
        let two_sided = z.norm_sqr() / n2;
        // Fold negative frequencies onto positive ones; DC and (even-length)
        // Nyquist have no mirror image.
        let p = if k == 0 || (len.is_multiple_of(2) && k == half) { two_sided } else { 2.0 * two_sided };
        // Frequency k/len lies in bin floor(k / len * 2N); integer arithmetic
        // keeps exact bin frequencies on their own bin.
        let bin = (k * 2 * psd_points / len).min(psd_points - 1);
        power[bin] += p;
    }
    let width = 0.5 / psd_points as f64;
    let frequencies = (0..psd_points).map(|i| (i as f64 + 0.5) * width).collect();
    Ok(PowerSpectrum { frequencies, power })
}

/// Normalized autocorrelation r(0..=max_lag) of the mean-removed signal,
/// using the biased (divide by total energy) estimator so r(0) = 1.
pub fn autocorrelation(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let len = values.len();
    if len < 2 {
        return Err(Error::InvalidInput(format!("autocorrelation needs >= 2 values, got {len}")));
    }
    if max_lag >= len {
        return Err(Error::InvalidInput(format!("max_lag {max_lag} must be < length {len}")));
    }
    let mu = mean(values);
    let spread = values.iter().map(|v| (v - mu).abs()).fold(0.0, f64::max);
    let magnitude = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * magnitude || spread == 0.0 {
        return Err(Error::InvalidInput("autocorrelation of a zero-variance signal".into()));
    }
    // Zero padding to >= 2L turns the circular correlation into a linear one.
    let padded = (2 * len).next_power_of_two();
    let mut buf = vec![Complex::new(0.0, 0.0); padded];
    for (b, &v) in buf.iter_mut().zip(values) {
        b.re = v - mu;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(padded).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(padded).process(&mut buf);

    let energy = buf[0].re;
    let mut r: Vec<f64> = buf[..=max_lag].iter().map(|z| z.re / energy).collect();
    r[0] = 1.0;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_has_no_power() {
        let s = periodogram(&[3.0; 64], 16).unwrap();
        assert_eq!(s.len(), 16);
        assert!(s.power.iter().all(|&p| p.abs() < 1e-20));
    }

    #[test]
    fn bins_are_increasing_and_in_band() {
        let s = periodogram(&[1.0, 2.0, 0.0, 5.0, 1.0], 7).unwrap();
        assert!(s.frequencies.windows(2).all(|w| w[0] < w[1]));
        assert!(s.frequencies.iter().all(|&f| (0.0..=0.5).contains(&f)));
        assert!(s.power.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn parseval_odd_and_even_lengths() {
        for len in [31usize, 64, 365] {
            let x: Vec<f64> = (0..len).map(|i| ((i * 7919) % 23) as f64 - (i % 5) as f64).collect();
            let mu = mean(&x);
            let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / len as f64;
            let s = periodogram(&x, 128).unwrap();
            assert!((s.total_power() - var).abs() <= 1e-6 * var, "len {len}");
        }
    }

    #[test]
    fn rejects_short_input() {
        assert!(periodogram(&[1.0], 8).is_err());
        assert!(autocorrelation(&[1.0], 0).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
        assert!(autocorrelation(&[4.0; 10], 3).is_err());
    }

    #[test]
    fn zero_lag_is_one() {
        let r = autocorrelation(&[1.0, 3.0, 2.0, 8.0, 0.5], 4).unwrap();
        assert_eq!(r[0], 1.0);
        assert!(r.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }
}
