//! Feature and prediction CSV files.

use std::path::Path;

use oocyte_core::features::{FeatureVector, Label, FEATURE_COUNT, FEATURE_NAMES};
use oocyte_core::svm::label_of;

use crate::error::{PipelineError, Result};
use crate::fsutil::write_atomic;

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |source| PipelineError::Csv { path: path.into(), source }
}

fn data(path: &Path, line: usize, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(format!("{}:{line}: {msg}", path.display()))
}

fn finish(path: &Path, writer: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = writer.into_inner().map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))?;
    write_atomic(path, &bytes).map_err(|e| PipelineError::io(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(csv_err(path))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err(path))?;
    if !header.iter().eq(expected.iter().copied()) {
        return Err(data(path, 1, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.parse().map_err(|_| data(path, line, format!("{field:?} is not a number")))
}

fn feature_header() -> Vec<&'static str> {
    FEATURE_NAMES.iter().copied().chain(["oocyte_id", "label"]).collect()
}

/// Header: the 24 feature names, `oocyte_id`, `label`.
pub fn write_features(path: &Path, rows: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(feature_header()).map_err(csv_err(path))?;
    for v in rows {
        let mut record: Vec<String> = v.values.iter().map(f64::to_string).collect();
        record.push(v.oocyte_id.clone());
        record.push(v.label.as_str().into());
        w.write_record(&record).map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &feature_header())?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(csv_err(path))?;
        let mut values = [0.0; FEATURE_COUNT];
        for (k, v) in values.iter_mut().enumerate() {
            *v = parse_f64(path, line, &record[k])?;
        }
        let label = Label::parse(&record[FEATURE_COUNT + 1])
            .ok_or_else(|| data(path, line, format!("unknown label {:?}", &record[FEATURE_COUNT + 1])))?;
        let v = FeatureVector::new(&record[FEATURE_COUNT], values, label).map_err(|e| data(path, line, e))?;
        out.push(v);
    }
    Ok(out)
}

/// Classifier output for one oocyte.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub oocyte_id: String,
    pub label: Label,
    pub decision: f64,
}

impl Prediction {
    pub fn new(oocyte_id: impl Into<String>, decision: f64) -> Self {
        Self { oocyte_id: oocyte_id.into(), label: label_of(decision), decision }
    }
}

const PREDICTION_HEADER: [&str; 3] = ["oocyte_id", "label", "decision"];

pub fn write_predictions(path: &Path, rows: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PREDICTION_HEADER).map_err(csv_err(path))?;
    for p in rows {
        w.write_record([p.oocyte_id.as_str(), p.label.as_str(), &p.decision.to_string()]).map_err(csv_err(path))?;
    }
    finish(path, w)
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &PREDICTION_HEADER)?;
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(csv_err(path))?;
        let label = Label::parse(&record[1])
            .filter(|l| *l != Label::Unknown)
            .ok_or_else(|| data(path, line, format!("bad predicted label {:?}", &record[1])))?;
        let decision = parse_f64(path, line, &record[2])?;
        out.push(Prediction { oocyte_id: record[0].into(), label, decision });
    }
    Ok(out)
}
