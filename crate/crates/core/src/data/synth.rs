//! Synthetic dataset generation: 11 Gaussian activity clusters in the
//! 51-dimensional normalized-skeleton feature space, with falls as a small
//! minority, labels exact by construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::subseed;

use super::{
    ActivityCode, FeatureVector, Provenance, ACTIVITY_CODES, FEATURE_DIM, FEATURE_RANGE,
};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Samples per activity code, index 0 = code 1. Codes 1..=5 are falls.
    pub per_class_counts: [usize; ACTIVITY_CODES as usize],
    /// Distance of each cluster center from the origin.
    pub separation: f64,
    /// Standard deviation of the isotropic per-sample noise.
    pub noise_sigma: f64,
}

impl Default for SynthConfig {
    /// Roughly 5k samples with falls a 3% minority.
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            per_class_counts: [30, 30, 30, 30, 30, 808, 808, 808, 808, 808, 808],
            separation: 5.0,
            noise_sigma: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class_counts.iter().any(|&c| c == 0) {
            return Err(Error::Config("per_class_counts must all be >= 1".into()));
        }
        if !self.separation.is_finite() || self.separation < 0.0 {
            return Err(Error::Config(format!(
                "separation must be >= 0, got {}",
                self.separation
            )));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.per_class_counts.iter().sum()
    }
}

/// Cluster centers: one random direction per class, scaled to `separation`.
fn centers(cfg: &SynthConfig) -> Vec<[f64; FEATURE_DIM]> {
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "synth-centers"));
    let mut out = Vec::with_capacity(ACTIVITY_CODES as usize);
    for _ in 0..ACTIVITY_CODES {
        let mut dir = [0.0; FEATURE_DIM];
        loop {
            let mut norm = 0.0;
            for v in &mut dir {
                *v = StandardNormal.sample(&mut rng);
                norm += *v * *v;
            }
            let norm = f64::sqrt(norm);
            if norm > 1e-9 {
                for v in &mut dir {
                    *v *= cfg.separation / norm;
                }
                break;
            }
        }
        out.push(dir);
    }
    out
}

/// Generates the configured number of samples per activity code, in code
/// order, deterministically from the config seed. Values are clamped to
/// the feature sanity range [-10, 10].
pub fn synthesize_dataset(cfg: &SynthConfig) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    let centers = centers(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "synth-noise"));
    let mut out = Vec::with_capacity(cfg.total());
    let mut frame = 0u32;
    for (class_idx, &count) in cfg.per_class_counts.iter().enumerate() {
        let activity = ActivityCode::new(class_idx as u8 + 1)?;
        let center = &centers[class_idx];
        for _ in 0..count {
            let mut values = [0.0; FEATURE_DIM];
            for (j, v) in values.iter_mut().enumerate() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *v = (center[j] + cfg.noise_sigma * noise).clamp(-FEATURE_RANGE, FEATURE_RANGE);
            }
            // Each synthetic sample is its own one-frame trial so trial-level
            // splitting stays meaningful.
            let provenance = Provenance { camera_id: 0, subject_id: 0, trial_id: frame, frame_id: frame };
            out.push(FeatureVector::new(values, activity, provenance)?);
            frame += 1;
        }
    }
    Ok(out)
}
