//! Ingestion, incidence, normalization and windowing of epi-curves.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CASES_HEADER: [&str; 3] = ["region_id", "date", "new_cases"];
const METADATA_HEADER: [&str; 5] = ["region_id", "name", "population", "country", "role"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(Error::Validation(format!("unknown role `{other}`"))),
        }
    }
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRole {
    pub region_id: String,
    pub role: Role,
}

/// Metadata row for one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionMeta {
    pub region_id: String,
    pub name: String,
    pub population: u64,
    pub country: String,
    pub role: Role,
}

/// One region's contiguous daily new-case series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpiCurve {
    pub region_id: String,
    pub name: String,
    pub country_code: String,
    pub population: u64,
    pub role: Role,
    pub dates: Vec<NaiveDate>,
    pub new_cases: Vec<f64>,
    /// Ingestion notes such as zero-filled gaps.
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EpiCurve {
    /// Builds a curve of consecutive days starting at `start`, checking the
    /// curve invariants.
    pub fn from_start(meta: &RegionMeta, start: NaiveDate, new_cases: Vec<f64>) -> Result<Self> {
        let dates = start.iter_days().take(new_cases.len()).collect();
        let curve = EpiCurve {
            region_id: meta.region_id.clone(),
            name: meta.name.clone(),
            country_code: meta.country.clone(),
            population: meta.population,
            role: meta.role,
            dates,
            new_cases,
            warnings: Vec::new(),
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.region_id;
        if self.new_cases.is_empty() {
            return Err(Error::Validation(format!("region `{id}` has no days")));
        }
        if self.dates.len() != self.new_cases.len() {
            return Err(Error::Validation(format!(
                "region `{id}`: {} dates but {} case values",
                self.dates.len(),
                self.new_cases.len()
            )));
        }
        if self.population == 0 {
            return Err(Error::Validation(format!("region `{id}`: population must be >= 1")));
        }
        if let Some(pair) = self.dates.windows(2).find(|w| w[0].succ_opt() != Some(w[1])) {
            return Err(Error::Validation(format!(
                "region `{id}`: dates {} and {} are not consecutive",
                pair[0], pair[1]
            )));
        }
        if let Some((i, v)) = self.new_cases.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!("region `{id}`: invalid case count {v} on {}", self.dates[i])));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.new_cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_cases.is_empty()
    }

    pub fn first_date(&self) -> NaiveDate {
        self.dates[0]
    }

    pub fn last_date(&self) -> NaiveDate {
        self.dates[self.dates.len() - 1]
    }

    pub fn meta(&self) -> RegionMeta {
        RegionMeta {
            region_id: self.region_id.clone(),
            name: self.name.clone(),
            population: self.population,
            country: self.country_code.clone(),
            role: self.role,
        }
    }

    /// Same region with a different case series; used for smoothed copies.
    pub fn with_cases(&self, new_cases: Vec<f64>) -> Result<Self> {
        let mut c = self.clone();
        c.new_cases = new_cases;
        c.validate()?;
        Ok(c)
    }

    /// Sub-curve covering `range` of day indices, or `None` when empty.
    pub fn slice(&self, range: Range<usize>) -> Option<Self> {
        if range.is_empty() || range.end > self.len() {
            return None;
        }
        let mut c = self.clone();
        c.dates = self.dates[range.clone()].to_vec();
        c.new_cases = self.new_cases[range].to_vec();
        Some(c)
    }
}

pub fn roles(curves: &[EpiCurve]) -> Vec<RegionRole> {
    curves.iter().map(|c| RegionRole { region_id: c.region_id.clone(), role: c.role }).collect()
}

/// A region whose rows could not be turned into a curve.
#[derive(Debug)]
pub struct RegionFailure {
    pub region_id: String,
    pub error: Error,
}

/// Result of lenient ingestion: every region that parsed cleanly plus a
/// failure entry for each one that did not.
#[derive(Debug, Default)]
pub struct Ingested {
    pub curves: Vec<EpiCurve>,
    pub failures: Vec<RegionFailure>,
}

fn check_header(headers: &csv::StringRecord, expected: &[&str], what: &str) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("{what} header must be `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn reader<R: Read>(stream: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(stream)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

pub fn read_metadata<R: Read>(stream: R) -> Result<Vec<RegionMeta>> {
    let mut rdr = reader(stream);
    check_header(rdr.headers().map_err(csv_error)?, &METADATA_HEADER, "metadata")?;
    let mut out: Vec<RegionMeta> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        if record.len() != METADATA_HEADER.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", METADATA_HEADER.len(), record.len()),
            });
        }
        let population: u64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("population `{}` is not a positive integer", &record[2]),
        })?;
        if population == 0 {
            return Err(Error::Parse { line, message: "population must be >= 1".into() });
        }
        let role = record[4].parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?;
        if out.iter().any(|m| m.region_id == record[0]) {
            return Err(Error::Parse { line, message: format!("duplicate metadata for region `{}`", &record[0]) });
        }
        out.push(RegionMeta {
            region_id: record[0].to_string(),
            name: record[1].to_string(),
            population,
            country: record[3].to_string(),
            role,
        });
    }
    Ok(out)
}

/// Parses cases and metadata, collecting per-region failures instead of
/// aborting. Header problems and malformed metadata are still fatal.
pub fn ingest_cases_lenient<C: Read, M: Read>(cases: C, metadata: M) -> Result<Ingested> {
    let meta = read_metadata(metadata)?;
    let meta_by_id: HashMap<&str, &RegionMeta> = meta.iter().map(|m| (m.region_id.as_str(), m)).collect();

    let mut rdr = reader(cases);
    check_header(rdr.headers().map_err(csv_error)?, &CASES_HEADER, "cases")?;

    let mut rows: BTreeMap<String, Vec<(NaiveDate, f64, u64)>> = BTreeMap::new();
    let mut errors: BTreeMap<String, Error> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let region = record.get(0).unwrap_or("").to_string();
        let parsed = parse_case_row(&record, line);
        match parsed {
            Ok((date, value)) => rows.entry(region).or_default().push((date, value, line)),
            Err(e) => {
                rows.entry(region.clone()).or_default();
                errors.entry(region).or_insert(e);
            }
        }
    }

    let mut out = Ingested::default();
    for (region, mut region_rows) in rows {
        if let Some(error) = errors.remove(&region) {
            out.failures.push(RegionFailure { region_id: region, error });
            continue;
        }
        let Some(m) = meta_by_id.get(region.as_str()) else {
            out.failures.push(RegionFailure { error: Error::MissingMetadata(region.clone()), region_id: region });
            continue;
        };
        region_rows.sort_by_key(|r| r.0);
        match assemble_curve(m, &region_rows) {
            Ok(curve) => out.curves.push(curve),
            Err(error) => out.failures.push(RegionFailure { region_id: region, error }),
        }
    }
    Ok(out)
}

/// Strict ingestion: any per-region failure is returned as an error.
pub fn ingest_cases<C: Read, M: Read>(cases: C, metadata: M) -> Result<Vec<EpiCurve>> {
    let mut ingested = ingest_cases_lenient(cases, metadata)?;
    if !ingested.failures.is_empty() {
        return Err(ingested.failures.remove(0).error);
    }
    Ok(ingested.curves)
}

fn parse_case_row(record: &csv::StringRecord, line: u64) -> Result<(NaiveDate, f64)> {
    if record.len() != CASES_HEADER.len() {
        return Err(Error::Parse {
            line,
            message: format!("expected {} fields, found {}", CASES_HEADER.len(), record.len()),
        });
    }
    if record[0].is_empty() {
        return Err(Error::Parse { line, message: "empty region_id".into() });
    }
    let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d")
        .map_err(|e| Error::Parse { line, message: format!("bad date `{}`: {e}", &record[1]) })?;
    let value: f64 =
        record[2].parse().map_err(|_| Error::Parse { line, message: format!("bad case count `{}`", &record[2]) })?;
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Validation(format!(
            "line {line}: case count must be a non-negative number, found {}",
            &record[2]
        )));
    }
    Ok((date, value))
}

fn assemble_curve(meta: &RegionMeta, rows: &[(NaiveDate, f64, u64)]) -> Result<EpiCurve> {
    let mut dates = Vec::with_capacity(rows.len());
    let mut cases = Vec::with_capacity(rows.len());
    let mut warnings = Vec::new();
    for &(date, value, line) in rows {
        if let Some(&last) = dates.last() {
            if date == last {
                return Err(Error::Validation(format!("line {line}: duplicate date {date}")));
            }
            let gap = (date - last).num_days() - 1;
            if gap > 0 {
                warnings.push(format!("{gap} missing day(s) between {last} and {date} filled with 0 cases"));
                let mut d = last;
                for _ in 0..gap {
                    d = d.succ_opt().expect("date overflow");
                    dates.push(d);
                    cases.push(0.0);
                }
            }
        }
        dates.push(date);
        cases.push(value);
    }
    let curve = EpiCurve {
        region_id: meta.region_id.clone(),
        name: meta.name.clone(),
        country_code: meta.country.clone(),
        population: meta.population,
        role: meta.role,
        dates,
        new_cases: cases,
        warnings,
    };
    curve.validate()?;
    Ok(curve)
}

pub fn write_cases_csv<W: Write>(curves: &[EpiCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CASES_HEADER).map_err(csv_error)?;
    for c in curves {
        for (d, v) in c.dates.iter().zip(&c.new_cases) {
            w.write_record([c.region_id.as_str(), &d.to_string(), &v.to_string()]).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metadata_csv<W: Write>(curves: &[EpiCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METADATA_HEADER).map_err(csv_error)?;
    for c in curves {
        w.write_record([
            c.region_id.as_str(),
            &c.name,
            &c.population.to_string(),
            &c.country_code,
            &c.role.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Daily cases per one million inhabitants.
pub fn incidence_per_million(curve: &EpiCurve) -> Vec<f64> {
    let pop = curve.population as f64;
    curve.new_cases.iter().map(|&c| c * 1e6 / pop).collect()
}

/// Min-max normalized values plus what is needed to undo the scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCurve {
    pub values: Vec<f64>,
    /// Original maximum.
    pub scale: f64,
    /// Original minimum.
    pub offset: f64,
    pub source: String,
}

impl NormalizedCurve {
    pub fn denormalize_value(&self, v: f64) -> f64 {
        denormalize(v, self.scale, self.offset)
    }

    pub fn denormalized(&self) -> Vec<f64> {
        self.values.iter().map(|&v| self.denormalize_value(v)).collect()
    }
}

pub fn denormalize(v: f64, scale: f64, offset: f64) -> f64 {
    v * (scale - offset) + offset
}

/// Scales `values` to [0, 1]. A constant series maps to all zeros.
pub fn normalize(values: &[f64], source: &str) -> Result<NormalizedCurve> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty series".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series `{source}` contains a non-finite value")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let normalized = if span > 0.0 {
        values.iter().map(|&v| ((v - min) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; values.len()]
    };
    Ok(NormalizedCurve { values: normalized, scale: max, offset: min, source: source.to_string() })
}

/// One (input, target) training or evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input_window: Vec<f64>,
    pub target_window: Vec<f64>,
    pub region_id: String,
    pub start_date: NaiveDate,
}

/// Index ranges of the non-overlapping windows `extract_samples` takes:
/// left-aligned at 0, remainder days dropped.
pub fn sample_ranges(len: usize, input_len: usize, output_len: usize) -> Vec<Range<usize>> {
    let size = input_len + output_len;
    assert!(size >= 1, "sample size must be at least one day");
    (0..len / size).map(|k| k * size..(k + 1) * size).collect()
}

pub fn extract_samples(
    values: &[f64],
    region_id: &str,
    first_date: NaiveDate,
    input_len: usize,
    output_len: usize,
) -> Vec<Sample> {
    sample_ranges(values.len(), input_len, output_len)
        .into_iter()
        .map(|r| {
            let split = r.start + input_len;
            Sample {
                input_window: values[r.start..split].to_vec(),
                target_window: values[split..r.end].to_vec(),
                region_id: region_id.to_string(),
                start_date: first_date + chrono::Days::new(r.start as u64),
            }
        })
        .collect()
}

/// Index of the first day on or after `split_date`, clamped to the curve.
pub fn split_index(curve: &EpiCurve, split_date: NaiveDate) -> usize {
    curve.dates.partition_point(|d| *d < split_date)
}

/// Values strictly before `split_date` and values on or after it.
pub fn temporal_split(curve: &EpiCurve, split_date: NaiveDate) -> (Vec<f64>, Vec<f64>) {
    let at = split_index(curve, split_date);
    (curve.new_cases[..at].to_vec(), curve.new_cases[at..].to_vec())
}
