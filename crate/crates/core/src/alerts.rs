//! Disease-situation alert levels from daily incidence per million.
//!
//! Levels run 1..=4. The low-inertia policy maps each day independently;
//! the high-inertia policy only moves one level at a time after a run of
//! consecutive days above (up) or below (down) the current level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertConfig {
    /// Lower bounds of levels 2 and 3, and the level-3 upper bound.
    pub thresholds: [f64; 3],
    pub up_days: usize,
    pub down_days: usize,
}

impl Default for AlertConfig {
    fn default() -> Self {
        AlertConfig { thresholds: [10.0, 20.0, 40.0], up_days: 7, down_days: 14 }
    }
}

impl AlertConfig {
    pub fn validate(&self) -> Result<()> {
        let t = self.thresholds;
        if !(t.iter().all(|v| v.is_finite()) && t[0] < t[1] && t[1] < t[2]) {
            return Err(Error::InvalidInput(format!("thresholds {t:?} must be strictly ascending")));
        }
        if self.up_days == 0 || self.down_days == 0 {
            return Err(Error::InvalidInput("up_days and down_days must be >= 1".into()));
        }
        Ok(())
    }

    /// Level for one day's incidence: `[0, t0) -> 1`, `[t0, t1) -> 2`,
    /// `[t1, t2] -> 3`, `(t2, inf) -> 4`.
    pub fn level(&self, incidence: f64) -> Result<u8> {
        if incidence.is_nan() || incidence < 0.0 {
            return Err(Error::InvalidInput(format!("incidence must be >= 0, got {incidence}")));
        }
        let [low, mid, high] = self.thresholds;
        Ok(if incidence < low {
            1
        } else if incidence < mid {
            2
        } else if incidence <= high {
            3
        } else {
            4
        })
    }
}

/// Level under the default 10 / 20 / 40 thresholds.
pub fn level_from_incidence(incidence: f64) -> Result<u8> {
    AlertConfig::default().level(incidence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertiaPolicy {
    LowInertia,
    HighInertia,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertSeries {
    pub levels: Vec<u8>,
    pub policy: InertiaPolicy,
    pub region_id: String,
}

pub fn low_inertia_series(region_id: &str, incidence: &[f64], config: &AlertConfig) -> Result<AlertSeries> {
    let levels = incidence.iter().map(|&i| config.level(i)).collect::<Result<_>>()?;
    Ok(AlertSeries { levels, policy: InertiaPolicy::LowInertia, region_id: region_id.to_string() })
}

pub fn high_inertia_series(region_id: &str, incidence: &[f64], config: &AlertConfig) -> Result<AlertSeries> {
    let mut levels = Vec::with_capacity(incidence.len());
    let mut current = 1u8;
    let (mut above, mut below) = (0usize, 0usize);
    for &i in incidence {
        let instant = config.level(i)?;
        if instant > current {
            above += 1;
            below = 0;
        } else if instant < current {
            below += 1;
            above = 0;
        } else {
            above = 0;
            below = 0;
        }
        if above >= config.up_days {
            current += 1;
            above = 0;
            below = 0;
        } else if below >= config.down_days {
            current -= 1;
            above = 0;
            below = 0;
        }
        levels.push(current);
    }
    Ok(AlertSeries { levels, policy: InertiaPolicy::HighInertia, region_id: region_id.to_string() })
}

fn change_days(levels: &[u8]) -> Vec<usize> {
    (1..levels.len()).filter(|&t| levels[t] != levels[t - 1]).collect()
}

pub fn count_level_changes(series: &AlertSeries) -> usize {
    change_days(&series.levels).len()
}

/// Number of level changes immediately followed by another change, i.e. two
/// transitions inside one span of three consecutive days (`a, b, c` with
/// `a != b` and `b != c`).
pub fn count_spikes(series: &AlertSeries) -> usize {
    let changes = change_days(&series.levels);
    changes.windows(2).filter(|w| w[1] - w[0] == 1).count()
}
