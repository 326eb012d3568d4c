//! Method matrix: raw or smoothed training data crossed with standard or
//! adaptive loss, scored by MAE against raw and smoothed ground truth.
//!
//! Every curve segment is normalized on its own. Training segments are the
//! pre-split history; test segments are the post-split remainder, smoothed
//! independently so no training cutoff leaks into the smoothed truth.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dsp::{optimize_cutoff, ObjectiveParams};
use crate::epidata::{denormalize, extract_samples, normalize, sample_ranges, split_index, EpiCurve, Sample};
use crate::error::{Error, Result};
use crate::forecaster::{
    predict, train, DensityHistogram, LossKind, LstmModel, TrainConfig, TrainOutcome, DEFAULT_DENSITY_BINS,
};
use crate::{HORIZON_DAYS, INPUT_DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodId {
    A,
    B,
    C,
    D,
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(MethodId::A),
            "B" | "b" => Ok(MethodId::B),
            "C" | "c" => Ok(MethodId::C),
            "D" | "d" => Ok(MethodId::D),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`, expected A, B, C or D"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingData {
    Raw,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Raw,
    Smoothed,
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroundTruth::Raw => "raw",
            GroundTruth::Smoothed => "smoothed",
        })
    }
}

/// Where a model's training samples come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Pooled pre-split history of the training regions.
    Generalized,
    /// The test region's own pre-split history.
    Local,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Generalized => "generalized",
            Strategy::Local => "local",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MethodSpec {
    pub id: MethodId,
    pub training_data: TrainingData,
    pub loss: LossKind,
}

impl MethodSpec {
    pub fn new(id: MethodId) -> Self {
        let (training_data, loss) = match id {
            MethodId::A => (TrainingData::Raw, LossKind::StandardMse),
            MethodId::B => (TrainingData::Raw, LossKind::Adaptive),
            MethodId::C => (TrainingData::Smoothed, LossKind::StandardMse),
            MethodId::D => (TrainingData::Smoothed, LossKind::Adaptive),
        };
        MethodSpec { id, training_data, loss }
    }

    pub fn all() -> Vec<MethodSpec> {
        [MethodId::A, MethodId::B, MethodId::C, MethodId::D].into_iter().map(Self::new).collect()
    }

    /// Parses a comma-separated list such as `A,C,D`.
    pub fn parse_list(list: &str) -> Result<Vec<MethodSpec>> {
        let mut ids: Vec<MethodId> =
            list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        Ok(ids.into_iter().map(Self::new).collect())
    }
}

/// Mean absolute error.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!("mae needs equal lengths, got {} and {}", y_true.len(), y_pred.len())));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidInput("mae of empty vectors".into()));
    }
    let total: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(total / y_true.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub split_date: NaiveDate,
    pub objective: ObjectiveParams,
    pub train: TrainConfig,
    pub density_bins: usize,
    pub strategies: Vec<Strategy>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split_date: NaiveDate::from_ymd_opt(2021, 3, 1).expect("valid date"),
            objective: ObjectiveParams::default(),
            train: TrainConfig::default(),
            density_bins: DEFAULT_DENSITY_BINS,
            strategies: vec![Strategy::Generalized],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub training_set: Strategy,
    pub method: MethodId,
    pub test_set: String,
    pub ground_truth: GroundTruth,
    /// Cases per day.
    pub mae: f64,
    /// Forecast windows scored.
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    pub config: EvalConfig,
    pub methods: Vec<MethodSpec>,
    pub train_regions: Vec<String>,
    pub test_regions: Vec<String>,
    /// Training windows per `strategy/method[/region]` model.
    pub train_samples: BTreeMap<String, usize>,
    /// Chosen cutoff per `region/segment`, for smoothed segments.
    pub cutoffs: BTreeMap<String, f64>,
    /// Free-form run metadata added by callers (version, config hash, ...).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
}

pub const REPORT_CSV_HEADER: &str = "training_set,method,test_set,ground_truth,mae,n_samples,seed";

impl EvalReport {
    pub fn cell(
        &self,
        training_set: Strategy,
        method: MethodId,
        test_set: &str,
        truth: GroundTruth,
    ) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.training_set == training_set && r.method == method && r.test_set == test_set && r.ground_truth == truth
        })
    }

    /// Mean MAE of one (strategy, method, truth) column across test regions.
    pub fn mean_mae(&self, training_set: Strategy, method: MethodId, truth: GroundTruth) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.training_set == training_set && r.method == method && r.ground_truth == truth)
            .map(|r| r.mae)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{REPORT_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.training_set, r.method, r.test_set, r.ground_truth, r.mae, r.n_samples, r.seed
            )?;
        }
        Ok(())
    }

    /// Nested JSON: `cells[training_set][method][test_set][ground_truth]`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Cell {
            mae: f64,
            n_samples: usize,
            seed: u64,
        }
        type Nested = BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, Cell>>>>;
        let mut cells: Nested = BTreeMap::new();
        for r in &self.rows {
            cells
                .entry(r.training_set.to_string())
                .or_default()
                .entry(r.method.to_string())
                .or_default()
                .entry(r.test_set.clone())
                .or_default()
                .insert(r.ground_truth.to_string(), Cell { mae: r.mae, n_samples: r.n_samples, seed: r.seed });
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            metadata: &'a ReportMetadata,
            cells: Nested,
        }
        Ok(serde_json::to_string_pretty(&Doc { metadata: &self.metadata, cells })?)
    }
}

/// One normalized curve segment, optionally smoothed.
struct Segment {
    region_id: String,
    first_date: NaiveDate,
    raw: Vec<f64>,
    normalized: Vec<f64>,
    scale: f64,
    offset: f64,
    smoothed: Option<Vec<f64>>,
    cutoff: Option<f64>,
}

impl Segment {
    fn build(curve: &EpiCurve, range: std::ops::Range<usize>, smooth: bool, params: &ObjectiveParams) -> Result<Self> {
        let raw = curve.new_cases[range.clone()].to_vec();
        let norm = normalize(&raw, &curve.region_id)?;
        let (smoothed, cutoff) = if smooth && raw.len() >= 8 {
            let r = optimize_cutoff(&norm.values, params)?;
            (Some(r.smoothed), Some(r.cutoff_chosen))
        } else {
            (None, None)
        };
        Ok(Segment {
            region_id: curve.region_id.clone(),
            first_date: curve.dates.get(range.start).copied().unwrap_or_else(|| curve.first_date()),
            raw,
            normalized: norm.values,
            scale: norm.scale,
            offset: norm.offset,
            smoothed,
            cutoff,
        })
    }

    fn series(&self, data: TrainingData) -> Result<&[f64]> {
        match data {
            TrainingData::Raw => Ok(&self.normalized),
            TrainingData::Smoothed => self
                .smoothed
                .as_deref()
                .ok_or_else(|| Error::EmptySamples(format!("region {} is too short to smooth", self.region_id))),
        }
    }

    fn samples(&self, data: TrainingData) -> Result<Vec<Sample>> {
        Ok(extract_samples(self.series(data)?, &self.region_id, self.first_date, INPUT_DAYS, HORIZON_DAYS))
    }
}

struct Job<'a> {
    strategy: Strategy,
    method: MethodSpec,
    label: String,
    training: Vec<&'a Segment>,
    tests: Vec<&'a Segment>,
}

struct JobOutput {
    rows: Vec<ReportRow>,
    label: String,
    train_samples: usize,
}

fn set_name(segments: &[&Segment]) -> String {
    let ids: Vec<&str> = segments.iter().map(|s| s.region_id.as_str()).collect();
    format!("[{}]", ids.join(", "))
}

/// A model trained with one method, plus what produced it.
#[derive(Debug, Clone)]
pub struct FittedMethod {
    pub method: MethodSpec,
    pub outcome: TrainOutcome,
    pub density: Option<DensityHistogram>,
    pub n_samples: usize,
}

fn fit_segments(segments: &[&Segment], method: MethodSpec, config: &EvalConfig, label: &str) -> Result<FittedMethod> {
    let mut samples = Vec::new();
    for seg in segments {
        samples.extend(seg.samples(method.training_data)?);
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples(format!(
            "{label} training set {} yields no {}-day windows",
            set_name(segments),
            INPUT_DAYS + HORIZON_DAYS
        )));
    }
    let density = match method.loss {
        LossKind::Adaptive => {
            let targets: Vec<f64> = samples.iter().flat_map(|s| s.target_window.iter().copied()).collect();
            Some(DensityHistogram::build(&targets, config.density_bins)?)
        }
        LossKind::StandardMse => None,
    };
    let train_config = TrainConfig { loss_kind: method.loss, ..config.train.clone() };
    let outcome = train(&samples, &train_config, density.as_ref())
        .map_err(|e| Error::Validation(format!("training {label}: {e}")))?;
    Ok(FittedMethod { method, outcome, density, n_samples: samples.len() })
}

/// Trains one method on the pooled pre-split history of `curves`.
pub fn fit_method(curves: &[EpiCurve], method: MethodSpec, config: &EvalConfig) -> Result<FittedMethod> {
    config.train.validate()?;
    let smooth = method.training_data == TrainingData::Smoothed;
    let segments: Vec<Segment> = curves
        .iter()
        .map(|c| Segment::build(c, 0..split_index(c, config.split_date), smooth, &config.objective))
        .collect::<Result<_>>()?;
    let refs: Vec<&Segment> = segments.iter().collect();
    fit_segments(&refs, method, config, &method.id.to_string())
}

/// Forecasts the days after the curve's last date from its final
/// `INPUT_DAYS`, normalizing (and smoothing, if asked) over the whole curve.
pub fn forecast_curve(
    model: &LstmModel,
    curve: &EpiCurve,
    training_data: TrainingData,
    params: &ObjectiveParams,
) -> Result<Vec<f64>> {
    if curve.len() < INPUT_DAYS {
        return Err(Error::EmptySamples(format!(
            "region {} has {} days, forecasting needs {INPUT_DAYS}",
            curve.region_id,
            curve.len()
        )));
    }
    let seg = Segment::build(curve, 0..curve.len(), training_data == TrainingData::Smoothed, params)?;
    let series = seg.series(training_data)?;
    predict(model, &series[series.len() - INPUT_DAYS..], seg.scale, seg.offset)
}

fn run_job(job: &Job<'_>, config: &EvalConfig) -> Result<JobOutput> {
    let fitted = fit_segments(&job.training, job.method, config, &job.label)?;
    let model = &fitted.outcome.model;
    let seed = config.train.seed;
    let mut rows = Vec::new();
    for test in &job.tests {
        let input = test.series(job.method.training_data)?;
        let smoothed_truth: Vec<f64> = test
            .smoothed
            .as_ref()
            .ok_or_else(|| Error::EmptySamples(format!("test region {} is too short to smooth", test.region_id)))?
            .iter()
            .map(|&v| denormalize(v, test.scale, test.offset))
            .collect();
        let windows = sample_ranges(input.len(), INPUT_DAYS, HORIZON_DAYS);
        if windows.is_empty() {
            return Err(Error::EmptySamples(format!(
                "test region {} has {} post-split days, fewer than one window",
                test.region_id,
                input.len()
            )));
        }
        let (mut preds, mut raw_truth, mut smooth_truth) = (Vec::new(), Vec::new(), Vec::new());
        for w in &windows {
            let split = w.start + INPUT_DAYS;
            preds.extend(predict(model, &input[w.start..split], test.scale, test.offset)?);
            raw_truth.extend_from_slice(&test.raw[split..w.end]);
            smooth_truth.extend_from_slice(&smoothed_truth[split..w.end]);
        }
        for (truth, values) in [(GroundTruth::Raw, &raw_truth), (GroundTruth::Smoothed, &smooth_truth)] {
            rows.push(ReportRow {
                training_set: job.strategy,
                method: job.method.id,
                test_set: test.region_id.clone(),
                ground_truth: truth,
                mae: mae(values, &preds)?,
                n_samples: windows.len(),
                seed,
            });
        }
    }
    Ok(JobOutput { rows, label: job.label.clone(), train_samples: fitted.n_samples })
}

/// Trains one model per (strategy, method) and scores every test region
/// against both ground truths. Models train in parallel; results are merged
/// in a fixed order, so reports are reproducible.
pub fn run_method_matrix(
    train_curves: &[EpiCurve],
    test_curves: &[EpiCurve],
    methods: &[MethodSpec],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.train.validate()?;
    config.objective.validate()?;
    if methods.is_empty() || config.strategies.is_empty() {
        return Err(Error::InvalidInput("at least one method and one strategy are required".into()));
    }
    if test_curves.is_empty() {
        return Err(Error::EmptySamples("test region set is empty".into()));
    }
    let train_ids: BTreeSet<&str> = train_curves.iter().map(|c| c.region_id.as_str()).collect();
    if config.strategies.contains(&Strategy::Generalized) {
        if let Some(c) = test_curves.iter().find(|c| train_ids.contains(c.region_id.as_str())) {
            return Err(Error::InvalidInput(format!("region {} is in both the training and test sets", c.region_id)));
        }
    }
    let smooth_train = methods.iter().any(|m| m.training_data == TrainingData::Smoothed);
    let params = &config.objective;

    let mut train_segments = Vec::new();
    if config.strategies.contains(&Strategy::Generalized) {
        for c in train_curves {
            let cut = split_index(c, config.split_date);
            train_segments.push(Segment::build(c, 0..cut, smooth_train, params)?);
        }
    }
    let mut local_segments = Vec::new();
    let mut test_segments = Vec::new();
    for c in test_curves {
        let cut = split_index(c, config.split_date);
        if cut == c.len() {
            return Err(Error::EmptySamples(format!("test region {} has no post-split days", c.region_id)));
        }
        test_segments.push(Segment::build(c, cut..c.len(), true, params)?);
        if config.strategies.contains(&Strategy::Local) {
            local_segments.push(Segment::build(c, 0..cut, smooth_train, params)?);
        }
    }

    let mut jobs = Vec::new();
    for &strategy in &config.strategies {
        for &method in methods {
            match strategy {
                Strategy::Generalized => jobs.push(Job {
                    strategy,
                    method,
                    label: format!("generalized/{}", method.id),
                    training: train_segments.iter().collect(),
                    tests: test_segments.iter().collect(),
                }),
                Strategy::Local => {
                    for (local, test) in local_segments.iter().zip(&test_segments) {
                        jobs.push(Job {
                            strategy,
                            method,
                            label: format!("local/{}/{}", method.id, test.region_id),
                            training: vec![local],
                            tests: vec![test],
                        });
                    }
                }
            }
        }
    }

    let outputs: Vec<Result<JobOutput>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs.iter().map(|job| scope.spawn(move || run_job(job, config))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Validation("training thread panicked".into()))))
            .collect()
    });

    let mut rows = Vec::new();
    let mut train_samples = BTreeMap::new();
    for out in outputs {
        let out = out?;
        train_samples.insert(out.label, out.train_samples);
        rows.extend(out.rows);
    }
    rows.sort_by(|a, b| {
        (a.training_set, a.method, &a.test_set, a.ground_truth).cmp(&(
            b.training_set,
            b.method,
            &b.test_set,
            b.ground_truth,
        ))
    });

    let mut cutoffs = BTreeMap::new();
    let tagged = train_segments
        .iter()
        .map(|s| (s, "train"))
        .chain(local_segments.iter().map(|s| (s, "local")))
        .chain(test_segments.iter().map(|s| (s, "test")));
    for (seg, tag) in tagged {
        if let Some(c) = seg.cutoff {
            cutoffs.insert(format!("{}/{tag}", seg.region_id), c);
        }
    }

    Ok(EvalReport {
        metadata: ReportMetadata {
            seed: config.train.seed,
            config: config.clone(),
            methods: methods.to_vec(),
            train_regions: train_curves.iter().map(|c| c.region_id.clone()).collect(),
            test_regions: test_curves.iter().map(|c| c.region_id.clone()).collect(),
            train_samples,
            cutoffs,
            provenance: BTreeMap::new(),
        },
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRatio {
    pub test_set: String,
    pub method: MethodId,
    pub ground_truth: GroundTruth,
    pub local_mae: f64,
    pub generalized_mae: f64,
    /// `local_mae / generalized_mae`; above 1 means generalized training won.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub ratios: Vec<StrategyRatio>,
    pub mean_ratio: f64,
}

/// `local / generalized`, with two perfect forecasts counting as a tie.
pub fn strategy_ratio(local_mae: f64, generalized_mae: f64) -> Result<f64> {
    if local_mae < 0.0 || generalized_mae < 0.0 {
        return Err(Error::InvalidInput("MAE cannot be negative".into()));
    }
    if generalized_mae == 0.0 {
        return if local_mae == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::NonFinite("generalized MAE is 0, ratio is unbounded".into()))
        };
    }
    Ok(local_mae / generalized_mae)
}

/// Pairs every generalized cell with its local counterpart.
pub fn compare_training_strategies(report: &EvalReport) -> Result<StrategyComparison> {
    let mut ratios = Vec::new();
    for g in report.rows.iter().filter(|r| r.training_set == Strategy::Generalized) {
        let l = report.cell(Strategy::Local, g.method, &g.test_set, g.ground_truth).ok_or_else(|| {
            Error::MissingRows(format!(
                "no local row for method {}, test set {}, {} truth",
                g.method, g.test_set, g.ground_truth
            ))
        })?;
        ratios.push(StrategyRatio {
            test_set: g.test_set.clone(),
            method: g.method,
            ground_truth: g.ground_truth,
            local_mae: l.mae,
            generalized_mae: g.mae,
            ratio: strategy_ratio(l.mae, g.mae)?,
        });
    }
    if ratios.is_empty() {
        return Err(Error::MissingRows("report has no generalized rows".into()));
    }
    let mean_ratio = ratios.iter().map(|r| r.ratio).sum::<f64>() / ratios.len() as f64;
    Ok(StrategyComparison { ratios, mean_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 5.0]).unwrap(), 1.5);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn method_table() {
        let all = MethodSpec::all();
        assert_eq!(
            all[0],
            MethodSpec { id: MethodId::A, training_data: TrainingData::Raw, loss: LossKind::StandardMse }
        );
        assert_eq!(all[3].training_data, TrainingData::Smoothed);
        assert_eq!(all[3].loss, LossKind::Adaptive);
        let picked = MethodSpec::parse_list("d, C,d").unwrap();
        assert_eq!(picked.iter().map(|m| m.id).collect::<Vec<_>>(), vec![MethodId::C, MethodId::D]);
        assert!(MethodSpec::parse_list("E").is_err());
        assert!(MethodSpec::parse_list("").is_err());
    }

    #[test]
    fn ratio_examples() {
        assert!((strategy_ratio(14.68, 10.37).unwrap() - 1.4156).abs() < 1e-3);
        assert_eq!(strategy_ratio(3.0, 3.0).unwrap(), 1.0);
        assert!(strategy_ratio(2.0, 3.0).unwrap() < 1.0);
        assert_eq!(strategy_ratio(0.0, 0.0).unwrap(), 1.0);
        assert!(strategy_ratio(1.0, 0.0).is_err());
    }
}
