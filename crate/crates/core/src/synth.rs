//! Seeded synthetic epi-curves.
//!
//! Each region's underlying incidence is a sum of logistic-derivative waves.
//! Daily counts get multiplicative log-normal noise, then a periodic-testing
//! pass reports the accumulated cases only every `report_every` days, with
//! zeros in between.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::epidata::{EpiCurve, RegionMeta, Role};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_regions: usize,
    pub test_regions: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    pub min_waves: usize,
    pub max_waves: usize,
    /// Range of wave peak heights, in daily cases per million.
    pub peak_incidence: [f64; 2],
    /// Range of wave widths (logistic scale), in days.
    pub wave_width: [f64; 2],
    pub population: [u64; 2],
    /// Report accumulated cases every `k` days; 1 means daily reporting.
    pub report_every: usize,
    /// Log-space standard deviation of the multiplicative daily noise.
    pub amplitude_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            train_regions: 12,
            test_regions: 4,
            days: 545,
            start_date: NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date"),
            min_waves: 2,
            max_waves: 4,
            peak_incidence: [15.0, 80.0],
            wave_width: [6.0, 16.0],
            population: [200_000, 3_000_000],
            report_every: 2,
            amplitude_noise: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.days >= 1
            && self.min_waves >= 1
            && self.min_waves <= self.max_waves
            && self.peak_incidence[0] > 0.0
            && self.peak_incidence[0] <= self.peak_incidence[1]
            && self.wave_width[0] > 0.0
            && self.wave_width[0] <= self.wave_width[1]
            && self.population[0] >= 1
            && self.population[0] <= self.population[1]
            && self.report_every >= 1
            && self.amplitude_noise >= 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!("inconsistent synthetic config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRegion {
    /// Reported counts, with testing artifacts.
    pub curve: EpiCurve,
    /// Expected daily cases before noise and reporting.
    pub clean: Vec<f64>,
}

/// Logistic-derivative pulse with unit peak centred on `centre`.
pub fn wave(t: f64, centre: f64, width: f64) -> f64 {
    let z = (-(t - centre) / width).exp();
    if !z.is_finite() {
        return 0.0;
    }
    4.0 * z / ((1.0 + z) * (1.0 + z))
}

/// Accumulates `daily` and releases it every `k` days (offset by `phase`).
/// Cases after the last report day stay unreported.
pub fn periodic_reporting(daily: &[f64], k: usize, phase: usize) -> Vec<f64> {
    if k <= 1 {
        return daily.to_vec();
    }
    let mut pending = 0.0;
    daily
        .iter()
        .enumerate()
        .map(|(t, &v)| {
            pending += v;
            if (t + phase).is_multiple_of(k) {
                std::mem::take(&mut pending)
            } else {
                0.0
            }
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

pub fn generate(config: &SynthConfig) -> Result<Vec<SyntheticRegion>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = if config.amplitude_noise > 0.0 {
        Some(LogNormal::new(0.0, config.amplitude_noise).map_err(|e| Error::InvalidInput(e.to_string()))?)
    } else {
        None
    };
    let total = config.train_regions + config.test_regions;
    let mut out = Vec::with_capacity(total);
    for r in 0..total {
        let role = if r < config.train_regions { Role::Train } else { Role::Test };
        let population = rng.random_range(config.population[0]..=config.population[1]);
        let waves = rng.random_range(config.min_waves..=config.max_waves);
        let days = config.days as f64;
        let mut clean = vec![0.0; config.days];
        for _ in 0..waves {
            let centre = rng.random_range(0.0..days);
            let width = uniform(&mut rng, config.wave_width);
            let peak = uniform(&mut rng, config.peak_incidence);
            for (t, c) in clean.iter_mut().enumerate() {
                *c += peak * wave(t as f64, centre, width) * population as f64 / 1e6;
            }
        }
        let daily: Vec<f64> = clean
            .iter()
            .map(|&c| {
                let factor = noise.as_ref().map_or(1.0, |d| d.sample(&mut rng));
                (c * factor).round()
            })
            .collect();
        let phase = rng.random_range(0..config.report_every);
        let reported = periodic_reporting(&daily, config.report_every, phase);
        let meta = RegionMeta {
            region_id: format!("SYN-{:03}", r + 1),
            name: format!("Synthetic {}", r + 1),
            population,
            country: "SYN".into(),
            role,
        };
        let curve = EpiCurve::from_start(&meta, config.start_date, reported)?;
        out.push(SyntheticRegion { curve, clean });
    }
    Ok(out)
}
