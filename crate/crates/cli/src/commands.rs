use std::fmt::Write as _;
use std::fs::File;

use anyhow::{bail, Context, Result};
use epicast::alerts::{count_level_changes, count_spikes, high_inertia_series, low_inertia_series, AlertSeries};
use epicast::dsp::optimize_cutoff;
use epicast::epidata::{
    incidence_per_million, ingest_cases_lenient, write_cases_csv, write_metadata_csv, EpiCurve, Role,
};
use epicast::evaluation::{
    compare_training_strategies, fit_method, forecast_curve, run_method_matrix, Strategy, TrainingData,
};
use epicast::forecaster::ModelFile;
use epicast::synth::generate;
use epicast::HORIZON_DAYS;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{file_stem, Artifacts, Provenance, RegionError};

/// What a batch command finished with: files written and regions that failed.
#[derive(Debug)]
pub struct Outcome {
    pub files: usize,
    pub failures: Vec<RegionError>,
}

fn load_curves(config: &RunConfig, failures: &mut Vec<RegionError>) -> Result<Vec<EpiCurve>> {
    let cases = config.input("cases")?;
    let metadata = config.input("metadata")?;
    let ingested = ingest_cases_lenient(
        File::open(cases).with_context(|| format!("opening {}", cases.display()))?,
        File::open(metadata).with_context(|| format!("opening {}", metadata.display()))?,
    )
    .context("ingesting cases")?;
    failures.extend(
        ingested.failures.into_iter().map(|f| RegionError { region_id: f.region_id, error: f.error.to_string() }),
    );
    Ok(ingested.curves)
}

fn region_error(curve: &EpiCurve, e: impl std::fmt::Display) -> RegionError {
    RegionError { region_id: curve.region_id.clone(), error: e.to_string() }
}

fn finish(artifacts: Artifacts, mut failures: Vec<RegionError>) -> Result<Outcome> {
    failures.sort_by(|a, b| a.region_id.cmp(&b.region_id));
    let files = artifacts.finish(&failures)?;
    Ok(Outcome { files, failures })
}

pub fn ingest(config: &RunConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("ingest", config))?;
    let prov = out.provenance().clone();

    let mut buf = Vec::new();
    write_cases_csv(&curves, &mut buf)?;
    out.write("cases.csv", &buf)?;
    buf.clear();
    write_metadata_csv(&curves, &mut buf)?;
    out.write("metadata.csv", &buf)?;

    #[derive(Serialize)]
    struct RegionSummary<'a> {
        region_id: &'a str,
        role: Role,
        days: usize,
        first_date: String,
        last_date: String,
        total_cases: f64,
        warnings: &'a [String],
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        provenance: &'a Provenance,
        regions: Vec<RegionSummary<'a>>,
        failures: &'a [RegionError],
    }
    let regions = curves
        .iter()
        .map(|c| RegionSummary {
            region_id: &c.region_id,
            role: c.role,
            days: c.len(),
            first_date: c.first_date().to_string(),
            last_date: c.last_date().to_string(),
            total_cases: c.new_cases.iter().sum(),
            warnings: &c.warnings,
        })
        .collect();
    let summary = Summary { provenance: &prov, regions, failures: &failures };
    out.write_json("ingest.json", &summary)?;
    finish(out, failures)
}

pub fn smooth(config: &RunConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("smooth", config))?;
    let prov = out.provenance().clone();

    #[derive(Serialize)]
    struct Diagnostics<'a> {
        region_id: &'a str,
        cutoff: f64,
        j_r: f64,
        j_psd: f64,
        j_total: f64,
        a: f64,
        b: f64,
        provenance: &'a Provenance,
    }
    for curve in &curves {
        let result = match optimize_cutoff(&curve.new_cases, &config.objective) {
            Ok(r) => r,
            Err(e) => {
                failures.push(region_error(curve, e));
                continue;
            }
        };
        let mut csv = String::from("date,raw,smoothed\n");
        for ((d, raw), s) in curve.dates.iter().zip(&curve.new_cases).zip(&result.smoothed) {
            writeln!(csv, "{d},{raw},{s}")?;
        }
        let stem = file_stem(&curve.region_id);
        out.write(&format!("smooth/{stem}.csv"), csv.as_bytes())?;
        let diag = Diagnostics {
            region_id: &curve.region_id,
            cutoff: result.cutoff_chosen,
            j_r: result.j_r,
            j_psd: result.j_psd,
            j_total: result.j_total,
            a: config.objective.a,
            b: config.objective.b,
            provenance: &prov,
        };
        out.write_json(&format!("smooth/{stem}.json"), &diag)?;
    }
    finish(out, failures)
}

fn alert_csv(curve: &EpiCurve, incidence: &[f64], low: &AlertSeries, high: &AlertSeries) -> Result<String> {
    let mut csv = String::from("date,incidence,low_inertia_level,high_inertia_level\n");
    for (t, d) in curve.dates.iter().enumerate() {
        writeln!(csv, "{d},{},{},{}", incidence[t], low.levels[t], high.levels[t])?;
    }
    Ok(csv)
}

#[derive(Debug, Serialize)]
struct SpikeSummary {
    region_id: String,
    spikes_raw: usize,
    spikes_smoothed: usize,
    level_changes_raw: usize,
    level_changes_smoothed: usize,
}

pub fn alerts(config: &RunConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("alerts", config))?;
    let prov = out.provenance().clone();

    let mut summaries = Vec::new();
    for curve in &curves {
        let raw = incidence_per_million(curve);
        let analysed = optimize_cutoff(&raw, &config.objective).and_then(|r| {
            let id = &curve.region_id;
            let series = [
                low_inertia_series(id, &raw, &config.alerts)?,
                high_inertia_series(id, &raw, &config.alerts)?,
                low_inertia_series(id, &r.smoothed, &config.alerts)?,
                high_inertia_series(id, &r.smoothed, &config.alerts)?,
            ];
            Ok((r.smoothed, series))
        });
        let (smoothed, [low_raw, high_raw, low_smooth, high_smooth]) = match analysed {
            Ok(v) => v,
            Err(e) => {
                failures.push(region_error(curve, e));
                continue;
            }
        };
        let stem = file_stem(&curve.region_id);
        out.write(&format!("alerts/{stem}_raw.csv"), alert_csv(curve, &raw, &low_raw, &high_raw)?.as_bytes())?;
        out.write(
            &format!("alerts/{stem}_smoothed.csv"),
            alert_csv(curve, &smoothed, &low_smooth, &high_smooth)?.as_bytes(),
        )?;
        summaries.push(SpikeSummary {
            region_id: curve.region_id.clone(),
            spikes_raw: count_spikes(&low_raw),
            spikes_smoothed: count_spikes(&low_smooth),
            level_changes_raw: count_level_changes(&low_raw),
            level_changes_smoothed: count_level_changes(&low_smooth),
        });
    }

    #[derive(Serialize)]
    struct Summary<'a> {
        provenance: &'a Provenance,
        regions: &'a [SpikeSummary],
        total_spikes_raw: usize,
        total_spikes_smoothed: usize,
    }
    let summary = Summary {
        provenance: &prov,
        regions: &summaries,
        total_spikes_raw: summaries.iter().map(|s| s.spikes_raw).sum(),
        total_spikes_smoothed: summaries.iter().map(|s| s.spikes_smoothed).sum(),
    };
    out.write_json("alerts/summary.json", &summary)?;
    finish(out, failures)
}

pub fn synth(config: &RunConfig) -> Result<Outcome> {
    let regions = generate(&config.synth)?;
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("synth", config))?;
    let curves: Vec<EpiCurve> = regions.iter().map(|r| r.curve.clone()).collect();

    let mut buf = Vec::new();
    write_cases_csv(&curves, &mut buf)?;
    out.write("cases.csv", &buf)?;
    buf.clear();
    write_metadata_csv(&curves, &mut buf)?;
    out.write("metadata.csv", &buf)?;

    let mut clean = String::from("region_id,date,expected_cases\n");
    for r in &regions {
        for (d, v) in r.curve.dates.iter().zip(&r.clean) {
            writeln!(clean, "{},{d},{v}", r.curve.region_id)?;
        }
    }
    out.write("clean.csv", clean.as_bytes())?;
    finish(out, Vec::new())
}

fn training_data_name(data: TrainingData) -> &'static str {
    match data {
        TrainingData::Raw => "raw",
        TrainingData::Smoothed => "smoothed",
    }
}

pub fn train(config: &RunConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let train_curves: Vec<EpiCurve> = curves.into_iter().filter(|c| c.role == Role::Train).collect();
    if train_curves.is_empty() {
        bail!("no regions with role `train` to train on");
    }
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("train", config))?;
    let eval = config.eval_config();
    for method in config.method_specs()? {
        let fitted = fit_method(&train_curves, method, &eval)?;
        let mut file = ModelFile::from_model(&fitted.outcome.model, Some(eval.train.clone()));
        file.train_config.as_mut().expect("set above").loss_kind = method.loss;
        file.provenance = out.provenance().as_map();
        file.provenance.insert("method".into(), method.id.to_string());
        file.provenance.insert("training_data".into(), training_data_name(method.training_data).into());
        file.provenance.insert("train_samples".into(), fitted.n_samples.to_string());
        file.provenance.insert("split_date".into(), eval.split_date.to_string());
        let mut json = file.to_json()?;
        json.push('\n');
        out.write(&format!("model_{}.json", method.id), json.as_bytes())?;

        let mut trace = String::from("epoch,loss\n");
        for (epoch, loss) in fitted.outcome.loss_trace.iter().enumerate() {
            writeln!(trace, "{},{loss}", epoch + 1)?;
        }
        out.write(&format!("loss_{}.csv", method.id), trace.as_bytes())?;
    }
    finish(out, failures)
}

pub fn predict(config: &RunConfig) -> Result<Outcome> {
    let path = config.input("model")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
    let file = ModelFile::from_json(&text).with_context(|| format!("parsing model {}", path.display()))?;
    let model = file.to_model()?;
    let training_data = match file.provenance.get("training_data").map(String::as_str) {
        None | Some("raw") => TrainingData::Raw,
        Some("smoothed") => TrainingData::Smoothed,
        Some(other) => bail!("model file has unknown training_data `{other}`"),
    };

    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("predict", config))?;
    let mut csv = String::from("region_id,date,predicted_cases\n");
    for curve in &curves {
        match forecast_curve(&model, curve, training_data, &config.objective) {
            Ok(forecast) => {
                let days = curve.last_date().iter_days().skip(1).take(HORIZON_DAYS);
                for (d, v) in days.zip(&forecast) {
                    writeln!(csv, "{},{d},{v}", curve.region_id)?;
                }
            }
            Err(e) => failures.push(region_error(curve, e)),
        }
    }
    out.write("predictions.csv", csv.as_bytes())?;
    finish(out, failures)
}

pub fn evaluate(config: &RunConfig) -> Result<Outcome> {
    let mut failures = Vec::new();
    let curves = load_curves(config, &mut failures)?;
    let (train_curves, test_curves): (Vec<EpiCurve>, Vec<EpiCurve>) =
        curves.into_iter().partition(|c| c.role == Role::Train);
    let mut out = Artifacts::new(config.out_dir()?, Provenance::new("evaluate", config))?;
    let prov = out.provenance().clone();

    let eval = config.eval_config();
    let mut report = run_method_matrix(&train_curves, &test_curves, &config.method_specs()?, &eval)?;
    report.metadata.provenance = out.provenance().as_map();

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.write("report.csv", &csv)?;
    let mut json = report.to_json()?;
    json.push('\n');
    out.write("report.json", json.as_bytes())?;

    if eval.strategies.contains(&Strategy::Generalized) && eval.strategies.contains(&Strategy::Local) {
        #[derive(Serialize)]
        struct Doc<'a> {
            provenance: &'a Provenance,
            #[serde(flatten)]
            comparison: epicast::evaluation::StrategyComparison,
        }
        let comparison = compare_training_strategies(&report)?;
        let doc = Doc { provenance: &prov, comparison };
        out.write_json("strategies.json", &doc)?;
    }
    finish(out, failures)
}
