//! Training for both cascade stages: seeded minibatch Adam with a small
//! stratified holdout carved off for per-epoch logging.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{self, FeatureVector, SplitSpec, SplitStrategy, FALL_CLASS_COUNT, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::{self, FitSpec, Mode, Network, Targets};
use crate::seed::subseed;

use super::TrainConfig;

/// Per-epoch training record; one row per epoch, fixed column set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub columns: Vec<&'static str>,
    /// rows[e] = (epoch number starting at 1, metric values).
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl TrainLog {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["epoch"];
        header.extend_from_slice(&self.columns);
        w.write_record(&header)?;
        for (epoch, values) in &self.rows {
            let mut record = vec![epoch.to_string()];
            record.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 90/10 stratified carve for logging. Datasets too small to split keep
/// everything on both sides; the log then reports training-set metrics.
fn carve_holdout(data: &[FeatureVector], seed: u64) -> (Vec<FeatureVector>, Vec<FeatureVector>) {
    let spec = SplitSpec { train_fraction: 0.9, strategy: SplitStrategy::RandomStratified, seed };
    match data::split(data, &spec) {
        Ok(pair) => pair,
        Err(_) => (data.to_vec(), data.to_vec()),
    }
}

/// Fall probability, accuracy at 0.5, and fall recall on a labeled slice.
/// Recall over zero falls is vacuously 1.
fn binary_eval(net: &Network, data: &[FeatureVector]) -> Result<(f64, f64)> {
    let x = data::feature_matrix(data);
    let probs = super::fall_probabilities(net, &x)?;
    let mut correct = 0usize;
    let mut falls = 0usize;
    let mut caught = 0usize;
    for (fv, &p) in data.iter().zip(&probs) {
        let pred = u8::from(p >= 0.5);
        if pred == fv.binary_label {
            correct += 1;
        }
        if fv.binary_label == 1 {
            falls += 1;
            if pred == 1 {
                caught += 1;
            }
        }
    }
    let accuracy = correct as f64 / data.len() as f64;
    let recall = if falls == 0 { 1.0 } else { caught as f64 / falls as f64 };
    Ok((accuracy, recall))
}

fn multiclass_accuracy(net: &Network, x: &Matrix, labels: &[usize]) -> Result<f64> {
    let heads = net.infer_forward(x)?;
    let last = heads.into_iter().next_back().unwrap();
    let mut correct = 0usize;
    for (r, &label) in labels.iter().enumerate() {
        let row = last.row(r);
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// First-stage trainer. Carves a tenth of the data off for the log,
/// trains on the rest, and records loss, holdout accuracy and holdout
/// fall recall every epoch.
pub fn train_bfc(data: &[FeatureVector], cfg: &TrainConfig) -> Result<(Network, TrainLog)> {
    cfg.validate()?;
    let falls = data.iter().filter(|fv| fv.binary_label == 1).count();
    if falls == 0 || falls == data.len() {
        return Err(Error::Training(format!(
            "binary stage needs both classes, got {falls} falls in {} samples",
            data.len()
        )));
    }

    let (train, held) = carve_holdout(data, subseed(cfg.seed, "bfc-holdout"));
    let x = data::feature_matrix(&train);
    let y: Vec<f64> = train.iter().map(|fv| f64::from(fv.binary_label)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "bfc-init"));
    let arch = net::default_arch(1);
    let mut model = net::build_network(FEATURE_DIM, 1, &arch, cfg.omega, &mut rng)?;

    let spec = FitSpec {
        epochs: cfg.epochs_bfc,
        batch: cfg.batch_bfc,
        lr: cfg.lr,
        seed: subseed(cfg.seed, "bfc-shuffle"),
    };
    let mut log = TrainLog {
        columns: vec!["train_loss", "val_accuracy", "val_fall_recall"],
        rows: Vec::with_capacity(cfg.epochs_bfc),
    };
    net::fit(&mut model, &x, Targets::Binary(&y), &spec, |epoch, loss, net| {
        net.set_mode(Mode::Infer);
        let (accuracy, recall) = binary_eval(net, &held)?;
        net.set_mode(Mode::Train);
        log.rows.push((epoch + 1, vec![loss, accuracy, recall]));
        Ok(())
    })?;
    model.set_mode(Mode::Infer);
    Ok((model, log))
}

/// Second-stage trainer over the fall-only subset.
pub fn train_mfec(
    data: &[FeatureVector],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(Network, TrainLog)> {
    cfg.validate()?;
    if data.len() != labels.len() {
        return Err(Error::Internal(format!(
            "{} samples with {} labels",
            data.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= FALL_CLASS_COUNT) {
        return Err(Error::Data(format!("fall-class label {bad} out of range")));
    }
    // The stratified carve below regroups by sample annotation, so the
    // caller's labels must agree with it.
    for (fv, &l) in data.iter().zip(labels) {
        if fv.multi_label != Some(l as u8) {
            return Err(Error::Data(format!(
                "label {l} disagrees with sample annotation {:?} for {}",
                fv.multi_label,
                fv.provenance.key()
            )));
        }
    }
    let mut present = [false; FALL_CLASS_COUNT];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Training(
            "five-class stage needs at least two fall classes in its training set".into(),
        ));
    }

    let (train, held) = carve_holdout(data, subseed(cfg.seed, "mfec-holdout"));
    let x = data::feature_matrix(&train);
    let y: Vec<usize> = train
        .iter()
        .map(|fv| fv.multi_label.map(usize::from))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Data("five-class training sample carries no fall class".into()))?;
    let held_x = data::feature_matrix(&held);
    let held_y: Vec<usize> = held
        .iter()
        .map(|fv| fv.multi_label.map(usize::from))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Data("five-class training sample carries no fall class".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(subseed(cfg.seed, "mfec-init"));
    let arch = net::default_arch(FALL_CLASS_COUNT);
    let mut model = net::build_network(FEATURE_DIM, FALL_CLASS_COUNT, &arch, cfg.omega, &mut rng)?;

    let spec = FitSpec {
        epochs: cfg.epochs_mfec,
        batch: cfg.batch_mfec,
        lr: cfg.lr,
        seed: subseed(cfg.seed, "mfec-shuffle"),
    };
    let mut log = TrainLog {
        columns: vec!["train_loss", "val_accuracy"],
        rows: Vec::with_capacity(cfg.epochs_mfec),
    };
    net::fit(&mut model, &x, Targets::Sparse(&y), &spec, |epoch, loss, net| {
        net.set_mode(Mode::Infer);
        let accuracy = multiclass_accuracy(net, &held_x, &held_y)?;
        net.set_mode(Mode::Train);
        log.rows.push((epoch + 1, vec![loss, accuracy]));
        Ok(())
    })?;
    model.set_mode(Mode::Infer);
    Ok((model, log))
}
