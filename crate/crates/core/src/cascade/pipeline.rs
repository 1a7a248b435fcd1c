//! End-to-end training run: optional label cleaning, train/test split,
//! both stage trainers, evaluation, and every artifact written to one
//! output directory. Failures carry the stage they happened in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cleaning::{self, CleaningReport, NetFoldClassifier};
use crate::data::{self, FeatureVector, SplitSpec};
use crate::error::{at_stage, Error, Result};
use crate::metrics::ClassificationReport;
use crate::seed::subseed;

use super::{
    build_binary_map, derive_multiclass_set, evaluate, train_bfc, train_mfec, BinaryMap,
    CascadeEvaluation, CascadeModel, TrainConfig, TrainLog,
};

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleaningSettings {
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_clean_epochs")]
    pub epochs: usize,
    #[serde(default = "default_clean_batch")]
    pub batch: usize,
    #[serde(default = "default_clean_lr")]
    pub lr: f64,
}

fn default_clean_epochs() -> usize {
    NetFoldClassifier::default().epochs
}
fn default_clean_batch() -> usize {
    NetFoldClassifier::default().batch
}
fn default_clean_lr() -> f64 {
    NetFoldClassifier::default().lr
}

impl Default for CleaningSettings {
    fn default() -> Self {
        CleaningSettings {
            folds: default_folds(),
            epochs: default_clean_epochs(),
            batch: default_clean_batch(),
            lr: default_clean_lr(),
        }
    }
}

impl CleaningSettings {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("cleaning needs >= 2 folds, got {}", self.folds)));
        }
        if self.epochs < 1 || self.batch < 2 || !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "bad cleaning trainer settings: epochs={} batch={} lr={}",
                self.epochs, self.batch, self.lr
            )));
        }
        Ok(())
    }

    pub fn classifier(&self) -> NetFoldClassifier {
        NetFoldClassifier { epochs: self.epochs, batch: self.batch, lr: self.lr }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// None disables the label-cleaning pass.
    pub cleaning: Option<CleaningSettings>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            cleaning: Some(CleaningSettings::default()),
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate()?;
        if let Some(c) = &self.cleaning {
            c.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub model: CascadeModel,
    pub evaluation: CascadeEvaluation,
    pub cleaning: Option<CleaningReport>,
    pub qbin: BinaryMap,
    pub train_size: usize,
    pub test_size: usize,
}

fn write_report(dir: &Path, stem: &str, report: &ClassificationReport) -> Result<()> {
    report.write_csv(&dir.join(format!("{stem}.csv")))?;
    report.write_json(&dir.join(format!("{stem}.json")))?;
    Ok(())
}

/// Runs the whole training pipeline on already-featurized samples and
/// writes models, the binary decision map, per-epoch logs, evaluation
/// reports and the cleaning report (when enabled) into `out_dir`.
pub fn run_full_pipeline(
    data: Vec<FeatureVector>,
    settings: &PipelineSettings,
    out_dir: &Path,
) -> Result<PipelineOutcome> {
    settings.validate()?;
    if data.is_empty() {
        return Err(Error::Data("pipeline received no samples".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let seed = settings.train.seed;

    let (data, cleaning_report) = match &settings.cleaning {
        Some(c) => {
            let (kept, report) = at_stage(
                "clean-labels",
                cleaning::clean_labels(data, c.folds, &c.classifier(), subseed(seed, "clean")),
            )?;
            (kept, Some(report))
        }
        None => (data, None),
    };
    if data.is_empty() {
        return Err(Error::Data("label cleaning removed every sample".into()));
    }

    let (train, test) = at_stage("split", data::split(&data, &settings.split))?;

    let (bfc, bfc_log) = at_stage("train-bfc", train_bfc(&train, &settings.train))?;
    let qbin = at_stage(
        "binary-map",
        build_binary_map(&bfc, &train, settings.train.m, settings.train.n),
    )?;
    let (d_multi, l_multi) = at_stage("derive-multiclass", derive_multiclass_set(&train, &qbin))?;
    let (mfec, mfec_log) = at_stage("train-mfec", train_mfec(&d_multi, &l_multi, &settings.train))?;

    let model = CascadeModel::new(bfc, mfec, settings.train.clone())?;
    let evaluation = at_stage("evaluate", evaluate(&model, &test))?;

    at_stage(
        "write-outputs",
        write_outputs(out_dir, &model, &qbin, &bfc_log, &mfec_log, &evaluation, &cleaning_report),
    )?;

    Ok(PipelineOutcome {
        model,
        evaluation,
        cleaning: cleaning_report,
        qbin,
        train_size: train.len(),
        test_size: test.len(),
    })
}

fn write_outputs(
    out_dir: &Path,
    model: &CascadeModel,
    qbin: &BinaryMap,
    bfc_log: &TrainLog,
    mfec_log: &TrainLog,
    evaluation: &CascadeEvaluation,
    cleaning_report: &Option<CleaningReport>,
) -> Result<()> {
    model.save(out_dir)?;
    qbin.write_csv(&out_dir.join("qbin.csv"))?;
    bfc_log.write_csv(&out_dir.join("bfc_log.csv"))?;
    mfec_log.write_csv(&out_dir.join("mfec_log.csv"))?;
    write_report(out_dir, "binary_report", &evaluation.binary)?;
    write_report(out_dir, "fall_report", &evaluation.falls)?;
    if let Some(report) = cleaning_report {
        report.write_csv(&out_dir.join("cleaning.csv"))?;
        report.write_json_summary(&out_dir.join("cleaning.json"))?;
    }
    Ok(())
}
