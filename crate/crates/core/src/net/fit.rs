//! Seeded minibatch training loop shared by every model in the crate.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{adam_step, loss_and_grads, AdamState, Network, Targets};

#[derive(Debug, Clone, Copy)]
pub struct FitSpec {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl FitSpec {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch < 2 {
            return Err(Error::Config(format!("batch size must be >= 2, got {}", self.batch)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Owned per-batch targets gathered from the full target slice.
enum OwnedTargets {
    Binary(Vec<f64>),
    Sparse(Vec<usize>),
}

impl OwnedTargets {
    fn gather(targets: Targets<'_>, idx: &[usize]) -> OwnedTargets {
        match targets {
            Targets::Binary(y) => OwnedTargets::Binary(idx.iter().map(|&i| y[i]).collect()),
            Targets::Sparse(y) => OwnedTargets::Sparse(idx.iter().map(|&i| y[i]).collect()),
        }
    }

    fn as_targets(&self) -> Targets<'_> {
        match self {
            OwnedTargets::Binary(y) => Targets::Binary(y),
            OwnedTargets::Sparse(y) => Targets::Sparse(y),
        }
    }
}

/// Runs `epochs` of shuffled minibatch Adam on `net`. After each epoch the
/// callback receives the epoch index and the size-weighted mean training
/// loss; it may flip the network to infer mode for evaluation as long as
/// it flips it back.
///
/// A trailing incomplete batch is kept, except a 1-sample remainder,
/// which is skipped because batchnorm statistics need at least two rows.
pub fn fit(
    net: &mut Network,
    x: &Matrix,
    targets: Targets<'_>,
    spec: &FitSpec,
    mut on_epoch: impl FnMut(usize, f64, &mut Network) -> Result<()>,
) -> Result<()> {
    spec.validate()?;
    let n = x.rows();
    if n != targets.len() {
        return Err(Error::Internal(format!("{n} samples but {} targets", targets.len())));
    }
    if n < 2 {
        return Err(Error::Training(format!("need at least 2 samples to train, got {n}")));
    }
    let batch = spec.batch.min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut state = AdamState::new(net);
    let mut perm: Vec<usize> = (0..n).collect();
    for epoch in 0..spec.epochs {
        perm.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut start = 0;
        while start < n {
            let end = (start + batch).min(n);
            if end - start == 1 {
                break;
            }
            let idx = &perm[start..end];
            let bx = x.gather_rows(idx);
            let by = OwnedTargets::gather(targets, idx);
            let (heads, cache) = net.train_forward(&bx)?;
            let (loss, dz) = loss_and_grads(&heads, by.as_targets(), net.head_weights())?;
            let grads = net.backward(&cache, &dz)?;
            adam_step(net, &grads, &mut state, spec.lr)?;
            loss_sum += loss * idx.len() as f64;
            seen += idx.len();
            start = end;
        }
        on_epoch(epoch, loss_sum / seen as f64, net)?;
    }
    Ok(())
}
