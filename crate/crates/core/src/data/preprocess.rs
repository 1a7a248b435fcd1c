//! Blank-frame removal, primary-subject selection and normalization.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{
    FeatureVector, Provenance, SkeletonFrame, FEATURE_RANGE, HIP_LEFT, HIP_RIGHT,
};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    /// A keypoint counts as confident when its confidence is strictly
    /// above this.
    pub c_min: f64,
    /// Frames with fewer than this many confident keypoints are blank.
    pub k_min: usize,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams { c_min: 0.1, k_min: 5 }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.c_min) {
            return Err(Error::Config(format!("c_min must be in [0,1), got {}", self.c_min)));
        }
        if self.k_min == 0 {
            return Err(Error::Config("k_min must be >= 1".into()));
        }
        Ok(())
    }
}

/// Drops frames with fewer than `k_min` confident keypoints; order kept.
pub fn remove_blank_frames(frames: Vec<SkeletonFrame>, params: &PreprocessParams) -> Vec<SkeletonFrame> {
    frames.into_iter().filter(|f| f.confident_count(params.c_min) >= params.k_min).collect()
}

/// Bounding box over the confident keypoints: (min_x, min_y, max_x, max_y).
fn confident_bbox(frame: &SkeletonFrame, c_min: f64) -> Option<(f64, f64, f64, f64)> {
    let mut bbox: Option<(f64, f64, f64, f64)> = None;
    for kp in frame.keypoints.iter().filter(|k| k.confidence > c_min) {
        bbox = Some(match bbox {
            None => (kp.x, kp.y, kp.x, kp.y),
            Some((x0, y0, x1, y1)) => (x0.min(kp.x), y0.min(kp.y), x1.max(kp.x), y1.max(kp.y)),
        });
    }
    bbox
}

fn bbox_diagonal(frame: &SkeletonFrame, c_min: f64) -> Option<f64> {
    confident_bbox(frame, c_min).map(|(x0, y0, x1, y1)| ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt())
}

/// Size-times-confidence score used to pick the real subject over
/// reflections and background passers-by: the bounding-box diagonal of the
/// confident keypoints (pixels) times the mean confidence of all 17
/// keypoints. Larger means a closer, more confidently detected skeleton.
pub fn distance_score(frame: &SkeletonFrame, c_min: f64) -> Result<f64> {
    let diag = bbox_diagonal(frame, c_min).ok_or_else(|| {
        Error::Data(format!(
            "distance score undefined: no confident keypoints in frame {}",
            frame.provenance.key()
        ))
    })?;
    let mean_conf: f64 =
        frame.keypoints.iter().map(|k| k.confidence).sum::<f64>() / frame.keypoints.len() as f64;
    Ok(diag * mean_conf)
}

/// Keeps exactly one detection per provenance: the one with the largest
/// distance score, ties broken by first parse order. Output preserves the
/// order in which each provenance first appeared.
pub fn select_primary_subject(
    frames: Vec<SkeletonFrame>,
    params: &PreprocessParams,
) -> Result<Vec<SkeletonFrame>> {
    let mut best: HashMap<Provenance, (usize, f64)> = HashMap::new();
    let mut out: Vec<SkeletonFrame> = Vec::new();
    for frame in frames {
        let score = distance_score(&frame, params.c_min)?;
        match best.get_mut(&frame.provenance) {
            None => {
                best.insert(frame.provenance, (out.len(), score));
                out.push(frame);
            }
            Some((slot, top)) => {
                if score > *top {
                    *top = score;
                    out[*slot] = frame;
                }
            }
        }
    }
    Ok(out)
}

/// Translates so the hip midpoint (keypoints 12 and 13 in 1-based order)
/// is the origin, scales by the confident-keypoint bounding-box diagonal,
/// and passes confidences through. Coordinates are clamped to the sanity
/// range [-10, 10] so a stray low-confidence keypoint cannot blow up the
/// feature scale.
pub fn normalize(frame: &SkeletonFrame, params: &PreprocessParams) -> Result<FeatureVector> {
    let diag = bbox_diagonal(frame, params.c_min).ok_or_else(|| {
        Error::Data(format!("cannot normalize frame {}: no confident keypoints", frame.provenance.key()))
    })?;
    if diag <= 0.0 {
        return Err(Error::Data(format!(
            "cannot normalize frame {}: degenerate skeleton with zero bounding-box diagonal",
            frame.provenance.key()
        )));
    }
    let hx = (frame.keypoints[HIP_LEFT].x + frame.keypoints[HIP_RIGHT].x) / 2.0;
    let hy = (frame.keypoints[HIP_LEFT].y + frame.keypoints[HIP_RIGHT].y) / 2.0;

    let mut values = [0.0; super::FEATURE_DIM];
    for (k, kp) in frame.keypoints.iter().enumerate() {
        values[3 * k] = ((kp.x - hx) / diag).clamp(-FEATURE_RANGE, FEATURE_RANGE);
        values[3 * k + 1] = ((kp.y - hy) / diag).clamp(-FEATURE_RANGE, FEATURE_RANGE);
        values[3 * k + 2] = kp.confidence;
    }
    FeatureVector::new(values, frame.activity, frame.provenance)
}

/// Full preprocessing: blank-frame removal, primary-subject selection,
/// normalization. Frame order is preserved throughout.
pub fn preprocess_frames(
    frames: Vec<SkeletonFrame>,
    params: &PreprocessParams,
) -> Result<Vec<FeatureVector>> {
    params.validate()?;
    let frames = remove_blank_frames(frames, params);
    let frames = select_primary_subject(frames, params)?;
    frames.iter().map(|f| normalize(f, params)).collect()
}
