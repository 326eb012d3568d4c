use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use epicast::alerts::AlertConfig;
use epicast::dsp::ObjectiveParams;
use epicast::evaluation::{EvalConfig, MethodSpec, Strategy};
use epicast::forecaster::{TrainConfig, DEFAULT_DENSITY_BINS};
use epicast::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything a run depends on. Loaded from one JSON file, then overridden
/// by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cases: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Output directory; not part of the config hash.
    pub out: Option<PathBuf>,
    /// Global seed; drives training and synthetic generation.
    pub seed: u64,
    pub objective: ObjectiveParams,
    pub alerts: AlertConfig,
    pub train: TrainConfig,
    /// Comma-separated method ids.
    pub methods: String,
    pub split_date: NaiveDate,
    pub strategies: Vec<Strategy>,
    pub density_bins: usize,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalConfig::default();
        RunConfig {
            cases: None,
            metadata: None,
            model: None,
            out: None,
            seed: 7,
            objective: ObjectiveParams::default(),
            alerts: AlertConfig::default(),
            train: TrainConfig::default(),
            methods: "A,B,C,D".into(),
            split_date: eval.split_date,
            strategies: vec![Strategy::Generalized, Strategy::Local],
            density_bins: DEFAULT_DENSITY_BINS,
            synth: SynthConfig::default(),
        }
    }
}

/// Flag values; `None` keeps the file or default value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub cases: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub grid_size: Option<usize>,
    pub epochs: Option<usize>,
    pub methods: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        let o = overrides.clone();
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        cfg.out = o.out.or(cfg.out);
        cfg.cases = o.cases.or(cfg.cases);
        cfg.metadata = o.metadata.or(cfg.metadata);
        cfg.model = o.model.or(cfg.model);
        if let Some(v) = o.a {
            cfg.objective.a = v;
        }
        if let Some(v) = o.b {
            cfg.objective.b = v;
        }
        if let Some(v) = o.grid_size {
            cfg.objective.grid_size = v;
        }
        if let Some(v) = o.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = o.methods {
            cfg.methods = v;
        }
        cfg.train.seed = cfg.seed;
        cfg.synth.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.alerts.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        self.method_specs()?;
        if self.density_bins == 0 {
            bail!("density_bins must be >= 1");
        }
        if self.strategies.is_empty() {
            bail!("at least one training strategy is required");
        }
        Ok(())
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        Ok(MethodSpec::parse_list(&self.methods)?)
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            split_date: self.split_date,
            objective: self.objective,
            train: self.train.clone(),
            density_bins: self.density_bins,
            strategies: self.strategies.clone(),
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("no output directory: pass --out or set `out` in the config")
    }

    pub fn input(&self, which: &str) -> Result<&Path> {
        let path = match which {
            "cases" => self.cases.as_deref(),
            "metadata" => self.metadata.as_deref(),
            "model" => self.model.as_deref(),
            _ => None,
        };
        let path = path.with_context(|| format!("no {which} path: pass --{which} or set `{which}` in the config"))?;
        if !path.exists() {
            bail!("{which} file {} does not exist", path.display());
        }
        Ok(path)
    }

    /// SHA-256 of the resolved config with the output directory removed.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"seed": 3, "objective": {"a": 1.5}, "train": {"epochs": 9}}"#).unwrap();
        let cfg = RunConfig::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!((cfg.seed, cfg.objective.a, cfg.objective.b, cfg.train.epochs), (3, 1.5, 1.0, 9));
        assert_eq!(cfg.train.seed, 3);
        let flags = Overrides { seed: Some(4), epochs: Some(2), ..Default::default() };
        let cfg = RunConfig::load(Some(&path), &flags).unwrap();
        assert_eq!((cfg.seed, cfg.train.epochs, cfg.synth.seed), (4, 2, 4));
    }

    #[test]
    fn rejects_bad_ratio_and_unknown_keys() {
        let flags = Overrides { a: Some(2.0), ..Default::default() };
        assert!(RunConfig::load(None, &flags).is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"sed": 3}"#).unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
    }

    #[test]
    fn hash_ignores_out_dir() {
        let a = RunConfig { out: Some("x".into()), ..Default::default() };
        let b = RunConfig { out: Some("y".into()), ..Default::default() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig { seed: 1, ..a.clone() }.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
