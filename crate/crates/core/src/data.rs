//! Survival records, datasets, feature-space metrics and CSV ingestion.

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One subject: feature vector, observed time `min(T, C)` and whether the
/// observed time is a death (`true`) or a censoring time (`false`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub features: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(features: Vec<f64>, time: f64, event: bool) -> Self {
        Self {
            features,
            time,
            event,
        }
    }
}

/// An ordered collection of records sharing one feature dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<SurvivalRecord>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking that every record has the same dimension
    /// and a valid observed time.
    pub fn new(records: Vec<SurvivalRecord>, feature_names: Vec<String>) -> Result<Self> {
        let dim = feature_names.len();
        for (row, r) in records.iter().enumerate() {
            if r.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.features.len(),
                });
            }
            if !(r.time >= 0.0) || !r.time.is_finite() {
                return Err(Error::NegativeTime {
                    row,
                    value: r.time,
                });
            }
        }
        Ok(Self {
            records,
            feature_names,
        })
    }

    /// Convenience constructor naming features `x1..xd`.
    pub fn from_records(records: Vec<SurvivalRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.features.len());
        Self::new(records, default_feature_names(dim))
    }

    /// Builds a dataset from parallel columns.
    pub fn from_columns(features: Vec<Vec<f64>>, times: &[f64], events: &[bool]) -> Result<Self> {
        if features.len() != times.len() {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: times.len(),
            });
        }
        if events.len() != times.len() {
            return Err(Error::LengthMismatch {
                left: events.len(),
                right: times.len(),
            });
        }
        let records = features
            .into_iter()
            .zip(times.iter().zip(events))
            .map(|(f, (&t, &e))| SurvivalRecord::new(f, t, e))
            .collect();
        Self::from_records(records)
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &SurvivalRecord {
        &self.records[i]
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn events(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.event).collect()
    }

    /// Records at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same subjects with `event` replaced by `!event`, so that estimators
    /// fit on the result target the censoring distribution.
    pub fn with_flipped_events(&self) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .map(|r| SurvivalRecord::new(r.features.clone(), r.time, !r.event))
                .collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Applies `f` to each feature vector.
    pub fn map_features(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Dataset {
        Dataset {
            records: self
                .records
                .iter()
                .map(|r| SurvivalRecord::new(f(&r.features), r.time, r.event))
                .collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// The `q`-quantile (0..=1) of the observed times, linear interpolation
    /// between order statistics.
    pub fn time_quantile(&self, q: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut t = self.times();
        t.sort_by(f64::total_cmp);
        let pos = q.clamp(0.0, 1.0) * (t.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        Ok(t[lo] + frac * (t[hi] - t[lo]))
    }
}

pub(crate) fn default_feature_names(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

/// Distance on standardized feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Metric {
    L1,
    #[default]
    L2,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        Ok(self.distance_unchecked(a, b))
    }

    #[inline]
    pub(crate) fn distance_unchecked(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// Free function form of [`Metric::distance`].
pub fn distance(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64> {
    metric.distance(a, b)
}

/// Per-feature centering and scaling. Scales are population standard
/// deviations; zero-variance features get scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.len() as f64;
        let d = data.dim();
        let mut mean = vec![0.0; d];
        for r in data.records() {
            for (m, x) in mean.iter_mut().zip(&r.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in data.records() {
            for ((v, x), m) in var.iter_mut().zip(&r.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform_dataset(&self, data: &Dataset) -> Result<Dataset> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: data.dim(),
            });
        }
        Ok(data.map_features(|f| {
            f.iter()
                .zip(self.mean.iter().zip(&self.scale))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        }))
    }
}

/// Free function form of [`Standardizer::fit`].
pub fn fit_standardizer(data: &Dataset) -> Result<Standardizer> {
    Standardizer::fit(data)
}

/// Which columns of a CSV file hold the observed time and event indicator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time_column: String,
    pub event_column: String,
    /// Columns excluded from the feature set (besides time and event).
    #[serde(default)]
    pub ignore_columns: Vec<String>,
}

impl CsvSchema {
    pub fn new(time_column: impl Into<String>, event_column: impl Into<String>) -> Self {
        Self {
            time_column: time_column.into(),
            event_column: event_column.into(),
            ignore_columns: Vec::new(),
        }
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::new("time", "event")
    }
}

/// What [`load_csv`] dropped along the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Rows removed because at least one cell was missing.
    pub dropped_rows: usize,
    /// Columns skipped because they hold non-numeric values.
    pub skipped_columns: Vec<String>,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "?" | "null" | "NULL")
}

fn parse_event(cell: &str, row: usize) -> Result<bool> {
    match cell.parse::<f64>() {
        Ok(0.0) => Ok(false),
        Ok(1.0) => Ok(true),
        _ => match cell {
            "true" | "TRUE" | "True" => Ok(true),
            "false" | "FALSE" | "False" => Ok(false),
            _ => Err(Error::EventNotBinary {
                row,
                value: cell.to_string(),
            }),
        },
    }
}

/// Reads a headered CSV file. Every column other than the time, event and
/// ignored columns whose cells are all numeric (or missing) becomes a
/// feature, in header order. Rows with any missing cell are dropped.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// [`load_csv`] over any reader.
pub fn read_csv(reader: impl std::io::Read, schema: &CsvSchema) -> Result<(Dataset, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = col(&schema.time_column)?;
    let event_idx = col(&schema.event_column)?;
    let ignored: HashSet<&str> = schema.ignore_columns.iter().map(String::as_str).collect();

    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;

    let mut feature_cols = Vec::new();
    let mut report = LoadReport::default();
    for (j, name) in headers.iter().enumerate() {
        if j == time_idx || j == event_idx || ignored.contains(name.as_str()) {
            continue;
        }
        let numeric = rows.iter().all(|r| {
            let cell = r.get(j).unwrap_or("");
            is_missing(cell) || cell.parse::<f64>().is_ok()
        });
        if numeric {
            feature_cols.push(j);
        } else {
            report.skipped_columns.push(name.clone());
        }
    }

    let mut records = Vec::with_capacity(rows.len());
    for (row, r) in rows.iter().enumerate() {
        let cell = |j: usize| r.get(j).unwrap_or("");
        let needed = feature_cols.iter().chain([&time_idx, &event_idx]);
        if needed.clone().any(|&j| is_missing(cell(j))) {
            report.dropped_rows += 1;
            continue;
        }
        let time: f64 = cell(time_idx)
            .parse()
            .map_err(|_| Error::NonNumericValue {
                row,
                column: schema.time_column.clone(),
                value: cell(time_idx).to_string(),
            })?;
        if !(time >= 0.0) || !time.is_finite() {
            return Err(Error::NegativeTime { row, value: time });
        }
        let event = parse_event(cell(event_idx), row)?;
        let features = feature_cols
            .iter()
            .map(|&j| cell(j).parse::<f64>().expect("checked numeric above"))
            .collect();
        records.push(SurvivalRecord::new(features, time, event));
    }
    if report.dropped_rows > 0 {
        log::info!("dropped {} rows with missing values", report.dropped_rows);
    }
    let names = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    Ok((Dataset::new(records, names)?, report))
}

/// Writes `data` as CSV with feature columns first, then `time`/`event`
/// columns named by `schema`.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(data, file, schema)
}

pub fn write_csv_to(data: &Dataset, writer: impl Write, schema: &CsvSchema) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(&schema.time_column);
    header.push(&schema.event_column);
    w.write_record(&header)?;
    for r in data.records() {
        let mut row: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CsvSchema {
        CsvSchema::new("time", "status")
    }

    #[test]
    fn three_rows_parse() {
        let text = "age,time,status\n50,1.5,1\n60,2,0\n70,3,1\n";
        let (d, rep) = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 1);
        assert_eq!(d.record(0).features, vec![50.0]);
        assert_eq!(d.times(), vec![1.5, 2.0, 3.0]);
        assert_eq!(d.events(), vec![true, false, true]);
        assert_eq!(rep.dropped_rows, 0);
    }

    #[test]
    fn missing_feature_drops_row() {
        let text = "a,b,time,status\n1,2,1,1\n,3,2,0\n4,5,3,1\n";
        let (d, rep) = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(rep.dropped_rows, 1);
        assert_eq!(d.feature_names(), ["a", "b"]);
    }

    #[test]
    fn event_two_is_rejected() {
        let text = "a,time,status\n1,1,2\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::EventNotBinary { row: 0, .. }));
    }

    #[test]
    fn missing_column_and_bad_time() {
        let text = "a,time\n1,1\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema()),
            Err(Error::MissingColumn(c)) if c == "status"
        ));
        let text = "a,time,status\n1,-1,1\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema()),
            Err(Error::NegativeTime { .. })
        ));
        let text = "a,time,status\n1,abc,1\n";
        assert!(matches!(
            read_csv(text.as_bytes(), &schema()),
            Err(Error::NonNumericValue { .. })
        ));
    }

    #[test]
    fn non_numeric_and_ignored_columns_are_not_features() {
        let text = "id,a,truth,time,status\nx1,1,9,1,1\nx2,2,9,2,0\n";
        let mut s = schema();
        s.ignore_columns.push("truth".into());
        let (d, rep) = read_csv(text.as_bytes(), &s).unwrap();
        assert_eq!(d.feature_names(), ["a"]);
        assert_eq!(rep.skipped_columns, vec!["id".to_string()]);
    }

    #[test]
    fn standardizer_examples() {
        let d = Dataset::from_columns(vec![vec![0.0], vec![2.0]], &[1.0, 1.0], &[true, true])
            .unwrap();
        let s = Standardizer::fit(&d).unwrap();
        assert_eq!(s.mean(), [1.0]);
        assert_eq!(s.scale(), [1.0]);

        let d = Dataset::from_columns(vec![vec![5.0], vec![5.0]], &[1.0, 1.0], &[true, true])
            .unwrap();
        let s = Standardizer::fit(&d).unwrap();
        assert_eq!(s.mean(), [5.0]);
        assert_eq!(s.scale(), [1.0]);
        assert_eq!(s.transform(&[5.0]).unwrap(), vec![0.0]);

        let empty = Dataset::from_records(vec![]).unwrap();
        assert!(matches!(Standardizer::fit(&empty), Err(Error::EmptyDataset)));
    }

    #[test]
    fn standardized_moments() {
        let feats: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![i as f64 * 0.37 + 2.0, (i * i) as f64 - 3.0, 7.0])
            .collect();
        let d = Dataset::from_columns(feats, &[1.0; 50], &[true; 50]).unwrap();
        let s = Standardizer::fit(&d).unwrap();
        let z = s.transform_dataset(&d).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = z.records().iter().map(|r| r.features[j]).collect();
            let m = col.iter().sum::<f64>() / 50.0;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 50.0;
            assert!(m.abs() < 1e-9);
            if j < 2 {
                assert!((v.sqrt() - 1.0).abs() < 1e-9);
            } else {
                assert_eq!(v, 0.0);
            }
        }
        // second pass is (numerically) the identity
        let s2 = Standardizer::fit(&z).unwrap();
        for (m, sc) in s2.mean().iter().zip(s2.scale()) {
            assert!(m.abs() < 1e-9);
            assert!((sc - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(Metric::L2.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(Metric::L1.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 7.0);
        assert_eq!(Metric::L1.distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(matches!(
            Metric::L2.distance(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantile() {
        let d = Dataset::from_columns(vec![vec![]; 5], &[5.0, 1.0, 2.0, 4.0, 3.0], &[true; 5])
            .unwrap();
        assert_eq!(d.time_quantile(0.75).unwrap(), 4.0);
        assert_eq!(d.time_quantile(0.5).unwrap(), 3.0);
    }
}
