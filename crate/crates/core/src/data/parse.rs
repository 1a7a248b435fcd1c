//! Keypoint CSV ingestion.
//!
//! Schema (one detection per line, header required):
//! `camera_id,subject_id,trial_id,frame_id,activity_code,x1,y1,c1,...,x17,y17,c17`

use std::path::Path;

use crate::error::{Error, Result};

use super::{ActivityCode, Keypoint, Provenance, SkeletonFrame, FEATURE_DIM, KEYPOINT_COUNT};

const ID_COLUMNS: usize = 5;
const COLUMNS: usize = ID_COLUMNS + FEATURE_DIM;

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

/// Reads every detection row in file order. Multiple rows may share a
/// frame id (multi-person frames); no de-duplication happens here.
pub fn parse_keypoint_csv(path: &Path) -> Result<Vec<SkeletonFrame>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;

    let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    if header.len() != COLUMNS {
        return Err(parse_err(
            path,
            1,
            format!("header has {} columns, expected {COLUMNS}", header.len()),
        ));
    }
    for (i, want) in ["camera_id", "subject_id", "trial_id", "frame_id", "activity_code"]
        .iter()
        .enumerate()
    {
        if header.get(i) != Some(*want) {
            return Err(parse_err(
                path,
                1,
                format!("header column {} is `{}`, expected `{want}`", i + 1, header.get(i).unwrap_or("")),
            ));
        }
    }

    let mut frames = Vec::new();
    for row in reader.records() {
        let record = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != COLUMNS {
            return Err(parse_err(
                path,
                line,
                format!("row has {} columns, expected {COLUMNS}", record.len()),
            ));
        }
        let provenance = Provenance {
            camera_id: field(path, line, &record, 0, "camera_id")?,
            subject_id: field(path, line, &record, 1, "subject_id")?,
            trial_id: field(path, line, &record, 2, "trial_id")?,
            frame_id: field(path, line, &record, 3, "frame_id")?,
        };
        let code: u8 = field(path, line, &record, 4, "activity_code")?;
        let activity = ActivityCode::new(code).map_err(|e| parse_err(path, line, e.to_string()))?;

        let mut keypoints = [Keypoint { x: 0.0, y: 0.0, confidence: 0.0 }; KEYPOINT_COUNT];
        for (k, kp) in keypoints.iter_mut().enumerate() {
            let base = ID_COLUMNS + 3 * k;
            let x: f64 = field(path, line, &record, base, &format!("x{}", k + 1))?;
            let y: f64 = field(path, line, &record, base + 1, &format!("y{}", k + 1))?;
            let c: f64 = field(path, line, &record, base + 2, &format!("c{}", k + 1))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(parse_err(path, line, format!("keypoint {} has non-finite coordinates", k + 1)));
            }
            if !(0.0..=1.0).contains(&c) {
                return Err(parse_err(
                    path,
                    line,
                    format!("confidence c{} must be in [0,1], got {c}", k + 1),
                ));
            }
            *kp = Keypoint { x, y, confidence: c };
        }
        frames.push(SkeletonFrame { provenance, activity, keypoints });
    }
    Ok(frames)
}
