//! Processed-dataset CSV: identifier columns, 51 normalized values, labels.
//!
//! Schema: `camera_id,subject_id,trial_id,frame_id,activity_code,
//! v1,...,v51,binary_label,multi_label` (header required; `multi_label`
//! empty for no-fall rows). Values are written with shortest round-trip
//! formatting, so write-read cycles are bit-exact.

use std::path::Path;

use crate::error::{Error, Result};

use super::{ActivityCode, FeatureVector, Provenance, FEATURE_DIM};

const ID_COLUMNS: usize = 5;
const COLUMNS: usize = ID_COLUMNS + FEATURE_DIM + 2;

fn header() -> Vec<String> {
    let mut h = vec![
        "camera_id".to_string(),
        "subject_id".to_string(),
        "trial_id".to_string(),
        "frame_id".to_string(),
        "activity_code".to_string(),
    ];
    for i in 1..=FEATURE_DIM {
        h.push(format!("v{i}"));
    }
    h.push("binary_label".to_string());
    h.push("multi_label".to_string());
    h
}

pub fn write_features_csv(path: &Path, data: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header())?;
    for fv in data {
        let mut rec = Vec::with_capacity(COLUMNS);
        rec.push(fv.provenance.camera_id.to_string());
        rec.push(fv.provenance.subject_id.to_string());
        rec.push(fv.provenance.trial_id.to_string());
        rec.push(fv.provenance.frame_id.to_string());
        rec.push(fv.activity.code().to_string());
        for v in &fv.values {
            rec.push(v.to_string());
        }
        rec.push(fv.binary_label.to_string());
        rec.push(fv.multi_label.map(|m| m.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = record.get(idx).unwrap_or("");
    raw.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column `{name}`: expected a number, got `{raw}`")))
}

struct RawRow {
    provenance: Provenance,
    activity_raw: String,
    values: [f64; FEATURE_DIM],
    binary_raw: String,
    multi_raw: String,
    line: u64,
}

fn read_rows(path: &Path) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let head = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if head.len() != COLUMNS {
        return Err(parse_err(path, 1, format!("header has {} columns, expected {COLUMNS}", head.len())));
    }
    let mut rows = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != COLUMNS {
            return Err(parse_err(path, line, format!("row has {} columns, expected {COLUMNS}", record.len())));
        }
        let provenance = Provenance {
            camera_id: field(path, line, &record, 0, "camera_id")?,
            subject_id: field(path, line, &record, 1, "subject_id")?,
            trial_id: field(path, line, &record, 2, "trial_id")?,
            frame_id: field(path, line, &record, 3, "frame_id")?,
        };
        let mut values = [0.0f64; FEATURE_DIM];
        for (i, v) in values.iter_mut().enumerate() {
            *v = field(path, line, &record, ID_COLUMNS + i, &format!("v{}", i + 1))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("v{} is not finite", i + 1)));
            }
        }
        rows.push(RawRow {
            provenance,
            activity_raw: record.get(4).unwrap_or("").to_string(),
            values,
            binary_raw: record.get(ID_COLUMNS + FEATURE_DIM).unwrap_or("").to_string(),
            multi_raw: record.get(ID_COLUMNS + FEATURE_DIM + 1).unwrap_or("").to_string(),
            line,
        })
    }
    Ok(rows)
}

/// Reads a fully labeled processed dataset. Label columns must be present
/// and consistent with the activity code.
pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::new();
    for row in read_rows(path)? {
        let code: u8 = row
            .activity_raw
            .parse()
            .map_err(|_| parse_err(path, row.line, format!("column `activity_code`: expected a number, got `{}`", row.activity_raw)))?;
        let activity =
            ActivityCode::new(code).map_err(|e| parse_err(path, row.line, e.to_string()))?;
        let fv = FeatureVector::new(row.values, activity, row.provenance)
            .map_err(|e| parse_err(path, row.line, e.to_string()))?;
        let binary: u8 = row
            .binary_raw
            .parse()
            .map_err(|_| parse_err(path, row.line, format!("column `binary_label`: expected 0 or 1, got `{}`", row.binary_raw)))?;
        if binary != fv.binary_label {
            return Err(parse_err(
                path,
                row.line,
                format!("binary_label {binary} conflicts with activity code {code}"),
            ));
        }
        let multi = if row.multi_raw.is_empty() {
            None
        } else {
            Some(row.multi_raw.parse::<u8>().map_err(|_| {
                parse_err(path, row.line, format!("column `multi_label`: expected 0..=4, got `{}`", row.multi_raw))
            })?)
        };
        if multi != fv.multi_label {
            return Err(parse_err(
                path,
                row.line,
                format!("multi_label {:?} conflicts with activity code {code}", row.multi_raw),
            ));
        }
        out.push(fv);
    }
    Ok(out)
}

/// Reads only values and provenance, ignoring label columns (they may be
/// blank). Used for prediction inputs.
pub fn read_feature_values_csv(path: &Path) -> Result<Vec<([f64; FEATURE_DIM], Provenance)>> {
    Ok(read_rows(path)?.into_iter().map(|r| (r.values, r.provenance)).collect())
}
