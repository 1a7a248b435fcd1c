//! Skeleton data ingestion, preprocessing, splitting and synthesis.
//!
//! The on-disk unit is a pose-estimator detection: 17 keypoints with 2D
//! pixel coordinates and confidences, tagged with camera/subject/trial/
//! frame identifiers and an activity code. Preprocessing turns detections
//! into fixed 51-value feature vectors in a body-centered frame.

mod io;
mod parse;
mod preprocess;
mod split;
mod synth;

pub use io::{read_feature_values_csv, read_features_csv, write_features_csv};
pub use parse::parse_keypoint_csv;
pub use preprocess::{
    distance_score, normalize, preprocess_frames, remove_blank_frames, select_primary_subject,
    PreprocessParams,
};
pub use split::{split, SplitSpec, SplitStrategy};
pub use synth::{synthesize_dataset, SynthConfig};

use crate::error::{Error, Result};

pub const KEYPOINT_COUNT: usize = 17;
/// 17 keypoints x (x, y, confidence).
pub const FEATURE_DIM: usize = 3 * KEYPOINT_COUNT;
/// Activity codes are 1..=ACTIVITY_CODES.
pub const ACTIVITY_CODES: u8 = 11;
pub const FALL_CLASS_COUNT: usize = 5;
/// Feature values are clamped to [-FEATURE_RANGE, FEATURE_RANGE].
pub const FEATURE_RANGE: f64 = 10.0;

/// Indices of the left and right hip in the 17-keypoint layout.
pub const HIP_LEFT: usize = 11;
pub const HIP_RIGHT: usize = 12;

/// The five fall types, in activity-code order (codes 1..=5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FallClass {
    /// Falling forward onto the hands.
    HF,
    /// Falling forward onto the knees.
    KF,
    /// Falling backward.
    BF,
    /// Falling sideways.
    SF,
    /// Falling while sitting down.
    SDF,
}

impl FallClass {
    pub const ALL: [FallClass; FALL_CLASS_COUNT] =
        [FallClass::HF, FallClass::KF, FallClass::BF, FallClass::SF, FallClass::SDF];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<FallClass> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FallClass::HF => "HF",
            FallClass::KF => "KF",
            FallClass::BF => "BF",
            FallClass::SF => "SF",
            FallClass::SDF => "SDF",
        }
    }
}

impl std::fmt::Display for FallClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Activity code 1..=11. Codes 1..=5 are the five fall types (HF, KF, BF,
/// SF, SDF); codes 6..=11 are daily activities (walking, standing, sitting,
/// picking up an object, jumping, laying).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActivityCode(u8);

impl ActivityCode {
    pub fn new(code: u8) -> Result<ActivityCode> {
        if (1..=ACTIVITY_CODES).contains(&code) {
            Ok(ActivityCode(code))
        } else {
            Err(Error::Data(format!("activity code must be 1..={ACTIVITY_CODES}, got {code}")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn is_fall(self) -> bool {
        self.0 <= FALL_CLASS_COUNT as u8
    }

    pub fn fall_class(self) -> Option<FallClass> {
        if self.is_fall() {
            FallClass::from_index(self.0 as usize - 1)
        } else {
            None
        }
    }
}

/// Identifies where a detection came from. One camera view of one frame of
/// one recording; multiple detections may share a provenance when several
/// people (or reflections) are in view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub camera_id: u32,
    pub subject_id: u32,
    pub trial_id: u32,
    pub frame_id: u32,
}

impl Provenance {
    /// Stable key used in report files.
    pub fn key(&self) -> String {
        format!("c{}s{}t{}f{}", self.camera_id, self.subject_id, self.trial_id, self.frame_id)
    }

    /// Recording identity: all frames of one captured sequence.
    pub fn trial_key(&self) -> (u32, u32) {
        (self.subject_id, self.trial_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// One person-detection in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub provenance: Provenance,
    pub activity: ActivityCode,
    pub keypoints: [Keypoint; KEYPOINT_COUNT],
}

impl SkeletonFrame {
    /// Number of keypoints with confidence strictly above `c_min`.
    pub fn confident_count(&self, c_min: f64) -> usize {
        self.keypoints.iter().filter(|k| k.confidence > c_min).count()
    }
}

/// A normalized sample: body-centered coordinates plus confidences, with
/// labels derived from the activity code.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
    pub activity: ActivityCode,
    /// 1 iff the activity is one of the five fall types.
    pub binary_label: u8,
    /// Fall-class index 0..=4, present iff `binary_label == 1`.
    pub multi_label: Option<u8>,
    pub provenance: Provenance,
}

impl FeatureVector {
    pub fn new(values: [f64; FEATURE_DIM], activity: ActivityCode, provenance: Provenance) -> Result<FeatureVector> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("feature value {bad} is not finite")));
        }
        let multi_label = activity.fall_class().map(|c| c.index() as u8);
        Ok(FeatureVector {
            values,
            activity,
            binary_label: u8::from(activity.is_fall()),
            multi_label,
            provenance,
        })
    }
}

/// Packs feature vectors into a row matrix for the network.
pub fn feature_matrix(data: &[FeatureVector]) -> crate::matrix::Matrix {
    let mut m = crate::matrix::Matrix::zeros(data.len(), FEATURE_DIM);
    for (i, fv) in data.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&fv.values);
    }
    m
}

#[cfg(test)]
pub(crate) mod test_support;
