//! Cutoff selection for the smoothing filter.
//!
//! The objective trades information retention against high-frequency noise
//! removal:
//!
//! ```text
//! J(fc) = a * J_R(fc) + b * J_PSD(fc)
//! ```
//!
//! `J_R` compares the filtered signal with the original through their
//! zero-lag cross-correlation normalized by the filtered signal's energy,
//! folded into [-1, 1]. It is 1 both for the identity and for a filter that
//! removes only uncorrelated noise, and drops when the filter attenuates the
//! structure the two signals share.
//!
//! `J_PSD` is the ramp-weighted (g(i) = i) power removed by the filter,
//! relative to `N` times the total initial power, so removal at high
//! frequencies earns more credit than removal near DC.

use serde::{Deserialize, Serialize};

use super::filter::{clamp_non_negative, FilterSpec, MirrorSpectrum, NYQUIST};
use super::spectrum::{periodogram, PowerSpectrum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveParams {
    /// Weight of the retention term.
    pub a: f64,
    /// Weight of the noise-removal term.
    pub b: f64,
    /// Number of log-spaced candidate cutoffs.
    pub grid_size: usize,
    /// Number of PSD bins.
    pub psd_points: usize,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        ObjectiveParams { a: 1.25, b: 1.0, grid_size: 200, psd_points: 128 }
    }
}

impl ObjectiveParams {
    pub const MIN_RATIO: f64 = 1.0;
    pub const MAX_RATIO: f64 = 1.5;

    /// Parameters for production smoothing; `a / b` must lie in [1.0, 1.5].
    pub fn new(a: f64, b: f64, grid_size: usize, psd_points: usize) -> Result<Self> {
        let p = ObjectiveParams { a, b, grid_size, psd_points };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for analysis sweeps (e.g. a=1, b=0); only requires
    /// non-negative weights that are not both zero.
    pub fn unconstrained(a: f64, b: f64, grid_size: usize, psd_points: usize) -> Result<Self> {
        let p = ObjectiveParams { a, b, grid_size, psd_points };
        p.check_shape()?;
        Ok(p)
    }

    pub fn ratio(&self) -> f64 {
        self.a / self.b
    }

    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::InvalidInput(format!("a and b must be positive, got a={} b={}", self.a, self.b)));
        }
        let r = self.ratio();
        if !(Self::MIN_RATIO..=Self::MAX_RATIO).contains(&r) {
            return Err(Error::InvalidInput(format!("a/b = {r} outside [{}, {}]", Self::MIN_RATIO, Self::MAX_RATIO)));
        }
        Ok(())
    }

    fn check_shape(&self) -> Result<()> {
        let weights_ok = self.a.is_finite()
            && self.b.is_finite()
            && self.a >= 0.0
            && self.b >= 0.0
            && (self.a > 0.0 || self.b > 0.0);
        if !weights_ok {
            return Err(Error::InvalidInput(format!("bad weights a={} b={}", self.a, self.b)));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidInput("grid_size must be >= 2".into()));
        }
        if self.psd_points == 0 {
            return Err(Error::InvalidInput("psd_points must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub j_total: f64,
    pub j_r: f64,
    pub j_psd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// Filtered series, clamped at 0.
    pub smoothed: Vec<f64>,
    pub cutoff_chosen: f64,
    pub j_r: f64,
    pub j_psd: f64,
    pub j_total: f64,
}

fn centered(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    let mu = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(move |v| v - mu)
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("length mismatch {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidInput("need at least two values".into()));
    }
    Ok(())
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in centered(x).zip(centered(y)) {
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Retention fitness between the initial and filtered series.
///
/// With `beta = <x, y> / <y, y>` on mean-removed series, returns
/// `sign(beta) * min(|beta|, 1 / |beta|)`. A constant `filtered` scores 0.
pub fn j_r(initial: &[f64], filtered: &[f64]) -> Result<f64> {
    check_pair(initial, filtered)?;
    let (mut sxy, mut syy) = (0.0, 0.0);
    for (a, b) in centered(initial).zip(centered(filtered)) {
        sxy += a * b;
        syy += b * b;
    }
    if syy == 0.0 || sxy == 0.0 {
        return Ok(0.0);
    }
    let beta = sxy / syy;
    let folded = beta.abs().min(1.0 / beta.abs());
    Ok(folded.copysign(beta))
}

/// Ramp-weighted removed power, normalized by `N` times the total initial
/// power and clipped to [0, 1].
pub fn j_psd(initial: &PowerSpectrum, filtered: &PowerSpectrum) -> Result<f64> {
    if initial.frequencies != filtered.frequencies || initial.power.len() != filtered.power.len() {
        return Err(Error::InvalidInput("PSD frequency grids differ".into()));
    }
    let n = initial.len();
    let removed: f64 =
        initial.power.iter().zip(&filtered.power).enumerate().map(|(i, (p0, p1))| (i + 1) as f64 * (p0 - p1)).sum();
    let reference = n as f64 * initial.total_power();
    if reference <= 0.0 {
        return Ok(0.0);
    }
    Ok((removed / reference).clamp(0.0, 1.0))
}

fn evaluate(
    values: &[f64],
    initial_psd: &PowerSpectrum,
    filtered: &[f64],
    params: &ObjectiveParams,
) -> Result<ObjectiveValue> {
    let r = j_r(values, filtered)?;
    let psd = j_psd(initial_psd, &periodogram(filtered, params.psd_points)?)?;
    Ok(ObjectiveValue { j_total: params.a * r + params.b * psd, j_r: r, j_psd: psd })
}

/// Objective at one cutoff, computed on the unclamped filter output.
pub fn objective(values: &[f64], cutoff: f64, params: &ObjectiveParams) -> Result<ObjectiveValue> {
    let spec = FilterSpec::new(cutoff)?;
    let filtered = MirrorSpectrum::new(values)?.filter(spec);
    let initial_psd = periodogram(values, params.psd_points)?;
    evaluate(values, &initial_psd, &filtered, params)
}

/// `grid_size` log-spaced cutoffs from `1 / len` to Nyquist, ascending.
pub fn cutoff_grid(len: usize, grid_size: usize) -> Vec<f64> {
    let lo = (1.0 / len as f64).min(NYQUIST).ln();
    let hi = NYQUIST.ln();
    let steps = (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size).map(|i| (lo + (hi - lo) * i as f64 / steps).exp()).collect();
    grid[0] = (1.0 / len as f64).min(NYQUIST);
    grid[grid_size - 1] = NYQUIST;
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub cutoff: f64,
    pub value: ObjectiveValue,
}

/// Objective over the whole cutoff grid, ascending in cutoff.
pub fn objective_curve(values: &[f64], params: &ObjectiveParams) -> Result<Vec<GridPoint>> {
    params.check_shape()?;
    let mirror = MirrorSpectrum::new(values)?;
    let initial_psd = periodogram(values, params.psd_points)?;
    cutoff_grid(values.len(), params.grid_size)
        .into_iter()
        .map(|cutoff| {
            let filtered = mirror.filter(FilterSpec::new(cutoff)?);
            let value = evaluate(values, &initial_psd, &filtered, params)?;
            Ok(GridPoint { cutoff, value })
        })
        .collect()
}

fn has_variance(values: &[f64]) -> bool {
    values.iter().any(|&v| v != values[0])
}

/// Grid-searches the cutoff maximizing the objective. Ties go to the smaller
/// cutoff. Constant input is returned unchanged with a Nyquist cutoff.
pub fn optimize_cutoff(values: &[f64], params: &ObjectiveParams) -> Result<FilterResult> {
    if values.len() < 8 {
        return Err(Error::InvalidInput(format!("cutoff optimization needs >= 8 values, got {}", values.len())));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("input contains {v}")));
    }
    params.check_shape()?;
    if !has_variance(values) {
        let r = 1.0;
        return Ok(FilterResult {
            smoothed: values.to_vec(),
            cutoff_chosen: NYQUIST,
            j_r: r,
            j_psd: 0.0,
            j_total: params.a * r,
        });
    }

    let mirror = MirrorSpectrum::new(values)?;
    let initial_psd = periodogram(values, params.psd_points)?;
    let mut best: Option<(f64, ObjectiveValue, Vec<f64>)> = None;
    for cutoff in cutoff_grid(values.len(), params.grid_size) {
        let filtered = mirror.filter(FilterSpec::new(cutoff)?);
        let value = evaluate(values, &initial_psd, &filtered, params)?;
        if best.as_ref().is_none_or(|(_, b, _)| value.j_total > b.j_total) {
            best = Some((cutoff, value, filtered));
        }
    }
    let (cutoff_chosen, value, mut smoothed) = best.expect("grid has >= 2 points");
    clamp_non_negative(&mut smoothed);
    Ok(FilterResult { smoothed, cutoff_chosen, j_r: value.j_r, j_psd: value.j_psd, j_total: value.j_total })
}
