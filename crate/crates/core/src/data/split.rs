//! Train/test splitting.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::subseed;

use super::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Per-activity-class random split; preserves class proportions within
    /// one sample per class.
    RandomStratified,
    /// Whole recordings (subject, trial) land on one side or the other.
    ByTrial,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub strategy: SplitStrategy,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.7, strategy: SplitStrategy::RandomStratified, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0,1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Disjoint, exhaustive train/test split. Output order on both sides
/// follows the input order, so splitting is deterministic given the seed.
pub fn split(data: &[FeatureVector], spec: &SplitSpec) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>)> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(spec.seed, "split"));

    let train_idx: Vec<usize> = match spec.strategy {
        SplitStrategy::RandomStratified => {
            // BTreeMap keeps class iteration order independent of input order.
            let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
            for (i, fv) in data.iter().enumerate() {
                by_class.entry(fv.activity.code()).or_default().push(i);
            }
            let mut picked = Vec::new();
            for idx in by_class.values() {
                let mut idx = idx.clone();
                idx.shuffle(&mut rng);
                let take = (spec.train_fraction * idx.len() as f64).round() as usize;
                picked.extend_from_slice(&idx[..take.min(idx.len())]);
            }
            picked
        }
        SplitStrategy::ByTrial => {
            let mut trials: Vec<(u32, u32)> = Vec::new();
            let mut members: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
            for (i, fv) in data.iter().enumerate() {
                let key = fv.provenance.trial_key();
                if !members.contains_key(&key) {
                    trials.push(key);
                }
                members.entry(key).or_default().push(i);
            }
            trials.shuffle(&mut rng);
            let want = spec.train_fraction * data.len() as f64;
            let mut picked = Vec::new();
            for key in trials {
                if (picked.len() as f64) >= want {
                    break;
                }
                picked.extend_from_slice(&members[&key]);
            }
            picked
        }
    };

    let mut in_train = vec![false; data.len()];
    for &i in &train_idx {
        in_train[i] = true;
    }
    let train: Vec<FeatureVector> =
        data.iter().zip(&in_train).filter(|(_, &t)| t).map(|(fv, _)| fv.clone()).collect();
    let test: Vec<FeatureVector> =
        data.iter().zip(&in_train).filter(|(_, &t)| !t).map(|(fv, _)| fv.clone()).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "train_fraction {} leaves an empty side ({} train / {} test of {} samples)",
            spec.train_fraction,
            train.len(),
            test.len(),
            data.len()
        )));
    }
    Ok((train, test))
}
