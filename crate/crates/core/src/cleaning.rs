//! Label cleaning via out-of-fold confidence.
//!
//! Each sample gets class probabilities from a model that never saw it
//! (stratified k-fold cross-validation). A sample is flagged as mislabeled
//! when the model's top class disagrees with the given label and its
//! probability clears that class's confidence threshold (the mean
//! self-probability over samples carrying that label). Flagged samples are
//! removed, never relabeled.
//!
//! Cleaning happens in the six-class space the cascade cares about:
//! 0 = no_fall, 1..=5 = the five fall types.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{FallClass, FeatureVector, FALL_CLASS_COUNT, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::net::{self, Mode, Targets};
use crate::seed::subseed;

pub const CLEAN_CLASS_COUNT: usize = FALL_CLASS_COUNT + 1;

/// 0 for no-fall, 1 + fall-class index for falls.
pub fn clean_label(fv: &FeatureVector) -> usize {
    match fv.multi_label {
        Some(m) => 1 + m as usize,
        None => 0,
    }
}

pub fn clean_label_name(label: usize) -> &'static str {
    if label == 0 {
        "no_fall"
    } else {
        FallClass::from_index(label - 1).map(FallClass::name).unwrap_or("?")
    }
}

/// Trains on one fold's training split and returns class probabilities
/// for held-out rows.
pub trait FoldClassifier {
    fn fit_predict(
        &self,
        train_x: &Matrix,
        train_y: &[usize],
        classes: usize,
        eval_x: &Matrix,
        seed: u64,
    ) -> Result<Matrix>;
}

/// Default fold classifier: a compact two-block network, enough for the
/// desk-scale datasets cleaning runs on.
#[derive(Debug, Clone, Copy)]
pub struct NetFoldClassifier {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for NetFoldClassifier {
    fn default() -> Self {
        NetFoldClassifier { epochs: 40, batch: 64, lr: 2e-3 }
    }
}

impl FoldClassifier for NetFoldClassifier {
    fn fit_predict(
        &self,
        train_x: &Matrix,
        train_y: &[usize],
        classes: usize,
        eval_x: &Matrix,
        seed: u64,
    ) -> Result<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, "fold-init"));
        let arch = net::small_arch(classes);
        let mut model =
            net::build_network(train_x.cols(), classes, &arch, [1.0, 1.0, 2.0], &mut rng)?;
        let spec = net::FitSpec {
            epochs: self.epochs,
            batch: self.batch,
            lr: self.lr,
            seed: subseed(seed, "fold-shuffle"),
        };
        net::fit(&mut model, train_x, Targets::Sparse(train_y), &spec, |_, _, _| Ok(()))?;
        model.set_mode(Mode::Infer);
        let heads = model.infer_forward(eval_x)?;
        Ok(heads.into_iter().next_back().unwrap())
    }
}

/// Canonical sample order: by label, then feature values, then provenance.
/// Fold assignment follows this order, so shuffling the input neither
/// changes which samples land in which fold nor the resulting flags.
fn canonical_order(data: &[FeatureVector], labels: &[usize]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&a, &b| {
        labels[a]
            .cmp(&labels[b])
            .then_with(|| {
                data[a]
                    .values
                    .iter()
                    .zip(data[b].values.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| *o != std::cmp::Ordering::Equal)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| data[a].provenance.cmp(&data[b].provenance))
    });
    idx
}

/// Out-of-fold class probabilities for every sample, via stratified k-fold
/// cross-validation. Every class present in the dataset must appear in
/// every fold's training split.
pub fn crossval_probs(
    data: &[FeatureVector],
    folds: usize,
    classifier: &dyn FoldClassifier,
    seed: u64,
) -> Result<Matrix> {
    if folds < 2 {
        return Err(Error::Config(format!("cleaning needs >= 2 folds, got {folds}")));
    }
    if data.is_empty() {
        return Err(Error::Data("cannot clean an empty dataset".into()));
    }
    let labels: Vec<usize> = data.iter().map(clean_label).collect();
    let order = canonical_order(data, &labels);

    // Stratified round-robin over the canonical order.
    let mut fold_of = vec![0usize; data.len()];
    let mut seen_per_class = [0usize; CLEAN_CLASS_COUNT];
    for &i in &order {
        let class = labels[i];
        fold_of[i] = seen_per_class[class] % folds;
        seen_per_class[class] += 1;
    }
    for class in 0..CLEAN_CLASS_COUNT {
        let count = seen_per_class[class];
        // A class entirely inside one fold would vanish from that fold's
        // training split.
        if count > 0 && count < 2.min(folds) {
            return Err(Error::Data(format!(
                "stratification failed: class {} has {count} sample(s), too few for {folds}-fold cleaning",
                clean_label_name(class)
            )));
        }
    }

    let mut probs = Matrix::zeros(data.len(), CLEAN_CLASS_COUNT);
    for fold in 0..folds {
        // Index lists in canonical order, so training batches (and hence
        // the fold models) do not depend on the input ordering.
        let train_idx: Vec<usize> = order.iter().copied().filter(|&i| fold_of[i] != fold).collect();
        let eval_idx: Vec<usize> = order.iter().copied().filter(|&i| fold_of[i] == fold).collect();
        if eval_idx.is_empty() {
            continue;
        }
        let mut train_classes = [false; CLEAN_CLASS_COUNT];
        for &i in &train_idx {
            train_classes[labels[i]] = true;
        }
        for class in 0..CLEAN_CLASS_COUNT {
            if seen_per_class[class] > 0 && !train_classes[class] {
                return Err(Error::Data(format!(
                    "stratification failed: class {} absent from fold {fold}'s training split",
                    clean_label_name(class)
                )));
            }
        }
        let train_x = gather(data, &train_idx);
        let train_y: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let eval_x = gather(data, &eval_idx);
        let fold_probs = classifier.fit_predict(
            &train_x,
            &train_y,
            CLEAN_CLASS_COUNT,
            &eval_x,
            subseed(seed, &format!("clean-fold-{fold}")),
        )?;
        if fold_probs.rows() != eval_idx.len() || fold_probs.cols() != CLEAN_CLASS_COUNT {
            return Err(Error::Internal(format!(
                "fold classifier returned {}x{}, expected {}x{CLEAN_CLASS_COUNT}",
                fold_probs.rows(),
                fold_probs.cols(),
                eval_idx.len()
            )));
        }
        for (r, &i) in eval_idx.iter().enumerate() {
            probs.row_mut(i).copy_from_slice(fold_probs.row(r));
        }
    }
    Ok(probs)
}

fn gather(data: &[FeatureVector], idx: &[usize]) -> Matrix {
    let mut m = Matrix::zeros(idx.len(), FEATURE_DIM);
    for (r, &i) in idx.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&data[i].values);
    }
    m
}

/// Per-class confidence thresholds: the mean predicted probability of
/// class j over the samples whose given label is j.
pub fn class_thresholds(probs: &Matrix, given: &[usize]) -> Result<Vec<f64>> {
    if probs.rows() != given.len() {
        return Err(Error::Internal(format!(
            "{} probability rows for {} labels",
            probs.rows(),
            given.len()
        )));
    }
    let classes = probs.cols();
    let mut sums = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    for (i, &label) in given.iter().enumerate() {
        if label >= classes {
            return Err(Error::Data(format!("label {label} out of range for {classes} classes")));
        }
        sums[label] += probs.get(i, label);
        counts[label] += 1;
    }
    for (class, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::Data(format!(
                "cannot compute a confidence threshold: class {} has no samples",
                clean_label_name(class)
            )));
        }
    }
    Ok(sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SampleVerdict {
    pub index: usize,
    pub given: usize,
    pub predicted: usize,
    /// Probability of the predicted (argmax) class.
    pub prob: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CleaningReport {
    pub samples: Vec<SampleVerdict>,
    pub class_thresholds: Vec<f64>,
    /// counts[given][predicted] = flagged samples with that label pair.
    pub counts: Vec<Vec<u64>>,
    pub flagged_total: usize,
    /// How the flags were produced, for the run log.
    pub method: String,
}

impl CleaningReport {
    pub fn flagged_indices(&self) -> Vec<usize> {
        self.samples.iter().filter(|s| s.flagged).map(|s| s.index).collect()
    }

    /// `index,given,predicted,prob,flagged` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["index", "given", "predicted", "prob", "flagged"])?;
        for s in &self.samples {
            w.write_record([
                s.index.to_string(),
                clean_label_name(s.given).to_string(),
                clean_label_name(s.predicted).to_string(),
                s.prob.to_string(),
                s.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json_summary(&self, path: &Path) -> Result<()> {
        #[derive(serde::Serialize)]
        struct Summary<'a> {
            samples_checked: usize,
            flagged_total: usize,
            class_thresholds: &'a [f64],
            class_names: Vec<&'static str>,
            counts: &'a [Vec<u64>],
            method: &'a str,
        }
        let summary = Summary {
            samples_checked: self.samples.len(),
            flagged_total: self.flagged_total,
            class_thresholds: &self.class_thresholds,
            class_names: (0..CLEAN_CLASS_COUNT).map(clean_label_name).collect(),
            counts: &self.counts,
            method: &self.method,
        };
        let mut text = serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Internal(format!("cleaning summary serialization: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Flags samples whose argmax class disagrees with the given label with
/// probability at or above that class's threshold.
pub fn flag_mislabeled(
    probs: &Matrix,
    given: &[usize],
    thresholds: &[f64],
) -> Result<CleaningReport> {
    let classes = probs.cols();
    if probs.rows() != given.len() || thresholds.len() != classes {
        return Err(Error::Internal("cleaning shapes are inconsistent".into()));
    }
    let mut samples = Vec::with_capacity(given.len());
    let mut counts = vec![vec![0u64; classes]; classes];
    let mut flagged_total = 0;
    for (i, &label) in given.iter().enumerate() {
        let row = probs.row(i);
        let mut predicted = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > row[predicted] {
                predicted = j;
            }
        }
        let prob = row[predicted];
        let flagged = predicted != label && prob >= thresholds[predicted];
        if flagged {
            counts[label][predicted] += 1;
            flagged_total += 1;
        }
        samples.push(SampleVerdict { index: i, given: label, predicted, prob, flagged });
    }
    Ok(CleaningReport {
        samples,
        class_thresholds: thresholds.to_vec(),
        counts,
        flagged_total,
        method: format!(
            "out-of-fold probabilities; flag if argmax != given label and prob >= \
             per-class threshold (mean self-probability); {flagged_total} of {} flagged",
            given.len()
        ),
    })
}

/// Removes flagged samples, preserving order; survivors are untouched.
pub fn clean(data: Vec<FeatureVector>, report: &CleaningReport) -> Result<Vec<FeatureVector>> {
    if report.samples.len() != data.len() {
        return Err(Error::Internal(format!(
            "cleaning report covers {} samples, dataset has {}",
            report.samples.len(),
            data.len()
        )));
    }
    if let Some(bad) = report.samples.iter().find(|s| s.index >= data.len()) {
        return Err(Error::Internal(format!("cleaning report index {} out of range", bad.index)));
    }
    let mut flagged = vec![false; data.len()];
    for s in &report.samples {
        if s.flagged {
            flagged[s.index] = true;
        }
    }
    let kept: Vec<FeatureVector> =
        data.into_iter().zip(&flagged).filter(|(_, &f)| !f).map(|(fv, _)| fv).collect();
    if kept.is_empty() {
        eprintln!("warning: label cleaning flagged every sample; dataset is now empty");
    }
    Ok(kept)
}

/// Full cleaning pass: cross-validated probabilities, thresholds, flags,
/// removal. Returns the surviving samples and the report.
pub fn clean_labels(
    data: Vec<FeatureVector>,
    folds: usize,
    classifier: &dyn FoldClassifier,
    seed: u64,
) -> Result<(Vec<FeatureVector>, CleaningReport)> {
    let probs = crossval_probs(&data, folds, classifier, seed)?;
    let labels: Vec<usize> = data.iter().map(clean_label).collect();
    let thresholds = class_thresholds(&probs, &labels)?;
    let report = flag_mislabeled(&probs, &labels, &thresholds)?;
    let kept = clean(data, &report)?;
    Ok((kept, report))
}
