//! Standard and density-weighted squared-error losses.
//!
//! Both losses share the form `L = 1/n * sum_samples sum_t w(t) * e(t)^2`
//! with `w = 1` for plain MSE. The adaptive loss divides each squared error
//! by `10 * ln^2(f)`, where `f` is the number of training targets falling in
//! the same histogram bin as the true value, floored at `e^2` so the weight
//! never exceeds 1/40.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of histogram bins over the training-target range.
pub const DEFAULT_DENSITY_BINS: usize = 64;

/// Natural-log count floor; `ln(COUNT_FLOOR) == 2`.
pub const COUNT_FLOOR: f64 = std::f64::consts::E * std::f64::consts::E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    StandardMse,
    Adaptive,
}

/// Equal-width histogram of training target values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub epsilon_floor: f64,
}

impl DensityHistogram {
    /// Bins `targets` over `[min, max]`; the top edge belongs to the last
    /// bin. A zero-width range puts every value in the first bin.
    pub fn build(targets: &[f64], bins: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::InvalidInput("density needs at least one target value".into()));
        }
        if bins == 0 {
            return Err(Error::InvalidInput("density needs at least one bin".into()));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("density targets contain NaN or infinity".into()));
        }
        let min = targets.iter().copied().fold(f64::INFINITY, f64::min);
        let max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (max - min) / bins as f64;
        let bin_edges = (0..=bins).map(|i| if i == bins { max } else { min + width * i as f64 }).collect();
        let mut hist = DensityHistogram { bin_edges, counts: vec![0; bins], epsilon_floor: COUNT_FLOOR };
        for &v in targets {
            let b = hist.bin_of(v);
            hist.counts[b] += 1;
        }
        Ok(hist)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin index of `v`; values outside the range clamp to the end bins.
    pub fn bin_of(&self, v: f64) -> usize {
        let bins = self.bins();
        let min = self.bin_edges[0];
        let max = self.bin_edges[bins];
        if max <= min || v <= min || v.is_nan() {
            return 0;
        }
        let idx = ((v - min) / (max - min) * bins as f64).floor();
        (idx as usize).min(bins - 1)
    }

    pub fn lookup(&self, v: f64) -> u64 {
        self.counts[self.bin_of(v)]
    }

    /// Loss weight `1 / (10 ln^2 max(f, e^2))` for a true value `v`.
    pub fn weight(&self, v: f64) -> f64 {
        weight_for_count(self.lookup(v))
    }
}

pub fn weight_for_count(count: u64) -> f64 {
    let f = count as f64;
    let log_f = if f > COUNT_FLOOR { f.ln() } else { 2.0 };
    1.0 / (10.0 * log_f * log_f)
}

/// Per-day weights for one target window.
pub fn target_weights(kind: LossKind, target: &[f64], density: Option<&DensityHistogram>) -> Result<Vec<f64>> {
    match kind {
        LossKind::StandardMse => Ok(vec![1.0; target.len()]),
        LossKind::Adaptive => {
            let d = density.ok_or_else(|| Error::InvalidInput("adaptive loss requires a density histogram".into()))?;
            Ok(target.iter().map(|&v| d.weight(v)).collect())
        }
    }
}

/// One sample's contribution `1/n * sum_t w(t) (y_true - y_pred)^2`.
pub fn weighted_sample_loss(y_true: &[f64], y_pred: &[f64], weights: &[f64], n: usize) -> f64 {
    let s: f64 = y_true.iter().zip(y_pred).zip(weights).map(|((t, p), w)| w * (t - p) * (t - p)).sum();
    s / n as f64
}

/// Gradient of [`weighted_sample_loss`] with respect to `y_pred`.
pub fn weighted_sample_grad(y_true: &[f64], y_pred: &[f64], weights: &[f64], n: usize) -> Vec<f64> {
    y_true.iter().zip(y_pred).zip(weights).map(|((t, p), w)| 2.0 * w * (p - t) / n as f64).collect()
}

/// Adaptive loss contribution of one sample in a batch of size `n`.
pub fn adaptive_loss(y_true: &[f64], y_pred: &[f64], density: &DensityHistogram, n: usize) -> f64 {
    let w: Vec<f64> = y_true.iter().map(|&v| density.weight(v)).collect();
    weighted_sample_loss(y_true, y_pred, &w, n)
}

/// Batch loss over `(y_true, y_pred)` pairs with `n` = batch size.
pub fn batch_loss(kind: LossKind, batch: &[(&[f64], &[f64])], density: Option<&DensityHistogram>) -> Result<f64> {
    let n = batch.len();
    let mut total = 0.0;
    for (t, p) in batch {
        let w = target_weights(kind, t, density)?;
        total += weighted_sample_loss(t, p, &w, n);
    }
    Ok(total)
}
