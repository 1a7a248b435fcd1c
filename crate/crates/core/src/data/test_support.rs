//! Fixture builders shared by data and pipeline tests.

use super::*;

pub fn kp(x: f64, y: f64, confidence: f64) -> Keypoint {
    Keypoint { x, y, confidence }
}

pub fn prov(camera_id: u32, subject_id: u32, trial_id: u32, frame_id: u32) -> Provenance {
    Provenance { camera_id, subject_id, trial_id, frame_id }
}

/// A frame whose keypoints sit on a 300x400-pixel cross pattern around
/// `(cx, cy)`, all at the given confidence.
pub fn spread_frame(p: Provenance, code: u8, cx: f64, cy: f64, confidence: f64) -> SkeletonFrame {
    let mut keypoints = [kp(cx, cy, confidence); KEYPOINT_COUNT];
    for (i, point) in keypoints.iter_mut().enumerate() {
        let angle = i as f64 / KEYPOINT_COUNT as f64 * std::f64::consts::TAU;
        point.x = cx + 150.0 * angle.cos();
        point.y = cy + 200.0 * angle.sin();
    }
    SkeletonFrame { provenance: p, activity: ActivityCode::new(code).unwrap(), keypoints }
}

/// A frame with the given number of confident keypoints (the rest are
/// zero-confidence copies).
pub fn partial_frame(p: Provenance, code: u8, confident: usize) -> SkeletonFrame {
    let mut frame = spread_frame(p, code, 100.0, 100.0, 0.9);
    for point in frame.keypoints.iter_mut().skip(confident) {
        point.confidence = 0.0;
    }
    frame
}

pub fn keypoint_csv_header() -> String {
    let mut cols = vec![
        "camera_id".to_string(),
        "subject_id".to_string(),
        "trial_id".to_string(),
        "frame_id".to_string(),
        "activity_code".to_string(),
    ];
    for i in 1..=KEYPOINT_COUNT {
        cols.push(format!("x{i}"));
        cols.push(format!("y{i}"));
        cols.push(format!("c{i}"));
    }
    cols.join(",")
}

pub fn keypoint_csv_row(frame: &SkeletonFrame) -> String {
    let mut cols = vec![
        frame.provenance.camera_id.to_string(),
        frame.provenance.subject_id.to_string(),
        frame.provenance.trial_id.to_string(),
        frame.provenance.frame_id.to_string(),
        frame.activity.code().to_string(),
    ];
    for point in &frame.keypoints {
        cols.push(point.x.to_string());
        cols.push(point.y.to_string());
        cols.push(point.confidence.to_string());
    }
    cols.join(",")
}
