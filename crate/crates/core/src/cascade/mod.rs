//! Two-stage cascade: a binary screen routes samples, a five-class model
//! names the fall type for everything the screen does not confidently
//! dismiss.
//!
//! The binary model's sigmoid output p is split three ways by two margins
//! around 0.5: p >= 0.5+n is a fall, p <= 0.5-m is a no-fall, and the band
//! in between is "uncertain". Uncertain samples are treated as falls and
//! forwarded to the second stage, trading a little precision for recall.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::{FallClass, FeatureVector, FALL_CLASS_COUNT, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::ClassificationReport;
use crate::net::{self, Network};

mod pipeline;
mod train;

pub use pipeline::{run_full_pipeline, CleaningSettings, PipelineOutcome, PipelineSettings};
pub use train::{train_bfc, train_mfec, TrainLog};


fn default_lr() -> f64 {
    1e-4
}
fn default_batch_bfc() -> usize {
    1024
}
fn default_batch_mfec() -> usize {
    32
}
fn default_epochs_bfc() -> usize {
    300
}
fn default_epochs_mfec() -> usize {
    600
}
fn default_omega() -> [f64; 3] {
    [1.0, 1.0, 2.0]
}
fn default_m() -> f64 {
    0.03
}
fn default_n() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch_bfc")]
    pub batch_bfc: usize,
    #[serde(default = "default_batch_mfec")]
    pub batch_mfec: usize,
    #[serde(default = "default_epochs_bfc")]
    pub epochs_bfc: usize,
    #[serde(default = "default_epochs_mfec")]
    pub epochs_mfec: usize,
    /// Head loss weights, deepest head last; stored as the raw ratio.
    #[serde(default = "default_omega")]
    pub omega: [f64; 3],
    /// Lower margin: p <= 0.5-m is a confident no-fall.
    #[serde(default = "default_m")]
    pub m: f64,
    /// Upper margin: p >= 0.5+n is a confident fall.
    #[serde(default = "default_n")]
    pub n: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: default_lr(),
            batch_bfc: default_batch_bfc(),
            batch_mfec: default_batch_mfec(),
            epochs_bfc: default_epochs_bfc(),
            epochs_mfec: default_epochs_mfec(),
            omega: default_omega(),
            m: default_m(),
            n: default_n(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_bfc < 2 || self.batch_mfec < 2 {
            return Err(Error::Config(format!(
                "batch sizes must be >= 2, got bfc={} mfec={}",
                self.batch_bfc, self.batch_mfec
            )));
        }
        if self.epochs_bfc < 1 || self.epochs_mfec < 1 {
            return Err(Error::Config(format!(
                "epoch counts must be >= 1, got bfc={} mfec={}",
                self.epochs_bfc, self.epochs_mfec
            )));
        }
        if self.omega.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("head weights must be positive, got {:?}", self.omega)));
        }
        if !(self.m >= 0.0 && self.n >= 0.0 && self.m.is_finite() && self.n.is_finite()) {
            return Err(Error::Config(format!("thresholds must be >= 0, got m={} n={}", self.m, self.n)));
        }
        if self.m + self.n >= 0.5 {
            return Err(Error::Config(format!(
                "threshold band too wide: m + n must stay below 0.5, got m={} n={}",
                self.m, self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Fall,
    NoFall,
    Uncertain,
}

impl Decision {
    pub fn name(self) -> &'static str {
        match self {
            Decision::Fall => "fall",
            Decision::NoFall => "no_fall",
            Decision::Uncertain => "uncertain",
        }
    }
}

/// Band rule shared by the map builder and the predictor. The fall side is
/// checked first, so m = n = 0 degenerates to a plain 0.5 threshold with
/// the boundary counted as a fall and no uncertain band.
pub fn decide(p: f64, m: f64, n: f64) -> Decision {
    if p >= 0.5 + n {
        Decision::Fall
    } else if p <= 0.5 - m {
        Decision::NoFall
    } else {
        Decision::Uncertain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryMapEntry {
    pub key: String,
    pub p: f64,
    pub decision: Decision,
}

/// Per-sample binary screen output, one entry per input row, input order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinaryMap {
    pub entries: Vec<BinaryMapEntry>,
}

impl BinaryMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `key,p,decision` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["key", "p", "decision"])?;
        for e in &self.entries {
            w.write_record([e.key.as_str(), &e.p.to_string(), e.decision.name()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Final-head fall probability for every row.
pub fn fall_probabilities(bfc: &Network, x: &Matrix) -> Result<Vec<f64>> {
    let heads = bfc.infer_forward(x)?;
    let last = heads.into_iter().next_back().ok_or_else(|| {
        Error::Internal("binary network produced no head outputs".into())
    })?;
    if last.cols() != 1 {
        return Err(Error::Internal(format!(
            "binary network head is {} wide, expected 1",
            last.cols()
        )));
    }
    Ok((0..last.rows()).map(|r| last.get(r, 0)).collect())
}

pub fn build_binary_map(bfc: &Network, data: &[FeatureVector], m: f64, n: f64) -> Result<BinaryMap> {
    let x = crate::data::feature_matrix(data);
    let probs = fall_probabilities(bfc, &x)?;
    let entries = data
        .iter()
        .zip(&probs)
        .map(|(fv, &p)| BinaryMapEntry {
            key: fv.provenance.key(),
            p,
            decision: decide(p, m, n),
        })
        .collect();
    Ok(BinaryMap { entries })
}

/// Training subset for the second stage: samples the screen did not
/// confidently dismiss, restricted to ground-truth falls. Screen false
/// positives are dropped because the five-class loss has no no-fall
/// target to give them.
pub fn derive_multiclass_set(
    data: &[FeatureVector],
    qbin: &BinaryMap,
) -> Result<(Vec<FeatureVector>, Vec<usize>)> {
    if qbin.len() != data.len() {
        return Err(Error::Internal(format!(
            "binary map covers {} samples, dataset has {}",
            qbin.len(),
            data.len()
        )));
    }
    let mut subset = Vec::new();
    let mut labels = Vec::new();
    for (fv, entry) in data.iter().zip(&qbin.entries) {
        if entry.decision == Decision::NoFall {
            continue;
        }
        if let Some(class) = fv.multi_label {
            subset.push(fv.clone());
            labels.push(class as usize);
        }
    }
    if subset.is_empty() {
        return Err(Error::Training(
            "no fall samples passed the binary screen; widen the uncertainty band \
             (larger m) or check the binary model"
                .into(),
        ));
    }
    Ok((subset, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    NoFall,
    Fall(FallClass),
}

impl Prediction {
    pub fn name(self) -> &'static str {
        match self {
            Prediction::NoFall => "no_fall",
            Prediction::Fall(c) => c.name(),
        }
    }
}

#[derive(Debug)]
pub struct CascadeModel {
    pub bfc: Network,
    pub mfec: Network,
    pub config: TrainConfig,
    pub class_names: [&'static str; FALL_CLASS_COUNT],
    /// Samples routed through the five-class stage since construction.
    mfec_calls: AtomicU64,
}

pub const CASCADE_MANIFEST: &str = "cascade.json";
pub const BFC_MODEL_FILE: &str = "bfc.json";
pub const MFEC_MODEL_FILE: &str = "mfec.json";

#[derive(Serialize, Deserialize)]
struct CascadeManifest {
    format_version: u32,
    config: TrainConfig,
    class_names: Vec<String>,
}

impl CascadeModel {
    pub fn new(bfc: Network, mfec: Network, config: TrainConfig) -> Result<CascadeModel> {
        if bfc.input_width() != FEATURE_DIM || mfec.input_width() != FEATURE_DIM {
            return Err(Error::Config(format!(
                "cascade models must take {FEATURE_DIM} inputs, got {} and {}",
                bfc.input_width(),
                mfec.input_width()
            )));
        }
        if bfc.class_count() != 1 {
            return Err(Error::Config("binary stage must have 1-wide heads".into()));
        }
        if mfec.class_count() != FALL_CLASS_COUNT {
            return Err(Error::Config(format!(
                "five-class stage has {}-wide heads",
                mfec.class_count()
            )));
        }
        config.validate()?;
        let mut class_names = [""; FALL_CLASS_COUNT];
        for c in FallClass::ALL {
            class_names[c.index()] = c.name();
        }
        Ok(CascadeModel { bfc, mfec, config, class_names, mfec_calls: AtomicU64::new(0) })
    }

    pub fn mfec_calls(&self) -> u64 {
        self.mfec_calls.load(Ordering::Relaxed)
    }

    pub fn reset_mfec_calls(&self) {
        self.mfec_calls.store(0, Ordering::Relaxed);
    }

    /// Screens every row, then runs the five-class stage once over the
    /// rows that survived. The call counter advances by one per routed
    /// sample, never for confident no-falls.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<Prediction>> {
        let probs = fall_probabilities(&self.bfc, x)?;
        let routed: Vec<usize> = probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| decide(p, self.config.m, self.config.n) != Decision::NoFall)
            .map(|(i, _)| i)
            .collect();
        let mut out = vec![Prediction::NoFall; x.rows()];
        if routed.is_empty() {
            return Ok(out);
        }
        self.mfec_calls.fetch_add(routed.len() as u64, Ordering::Relaxed);
        let sub = x.gather_rows(&routed);
        let heads = self.mfec.infer_forward(&sub)?;
        let last = heads
            .into_iter()
            .next_back()
            .ok_or_else(|| Error::Internal("five-class network produced no head outputs".into()))?;
        for (r, &i) in routed.iter().enumerate() {
            let row = last.row(r);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                // Strict comparison keeps the lowest index on ties.
                if v > row[best] {
                    best = j;
                }
            }
            out[i] = Prediction::Fall(FallClass::from_index(best).ok_or_else(|| {
                Error::Internal(format!("five-class argmax {best} out of range"))
            })?);
        }
        Ok(out)
    }

    pub fn predict_one(&self, values: &[f64; FEATURE_DIM]) -> Result<Prediction> {
        let x = Matrix::from_vec(1, FEATURE_DIM, values.to_vec());
        Ok(self.predict_batch(&x)?.remove(0))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        net::save_model(&self.bfc, &dir.join(BFC_MODEL_FILE))?;
        net::save_model(&self.mfec, &dir.join(MFEC_MODEL_FILE))?;
        let manifest = CascadeManifest {
            format_version: 1,
            config: self.config.clone(),
            class_names: self.class_names.iter().map(|s| s.to_string()).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("cascade manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(dir.join(CASCADE_MANIFEST), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<CascadeModel> {
        let manifest_path = dir.join(CASCADE_MANIFEST);
        let text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", manifest_path.display())))?;
        let manifest: CascadeManifest = serde_json::from_str(&text).map_err(|e| {
            Error::Data(format!("bad cascade manifest {}: {e}", manifest_path.display()))
        })?;
        if manifest.format_version != 1 {
            return Err(Error::Data(format!(
                "unsupported cascade manifest version {} (supported: 1)",
                manifest.format_version
            )));
        }
        let expected: Vec<&str> = FallClass::ALL.iter().map(|c| c.name()).collect();
        if manifest.class_names != expected {
            return Err(Error::Data(format!(
                "unexpected class names {:?} in cascade manifest",
                manifest.class_names
            )));
        }
        let bfc = net::load_model(&dir.join(BFC_MODEL_FILE))?;
        let mfec = net::load_model(&dir.join(MFEC_MODEL_FILE))?;
        CascadeModel::new(bfc, mfec, manifest.config)
    }
}

pub const BINARY_REPORT_LABELS: [&str; 2] = ["no_fall", "fall"];

/// Truth-side label order for the fall report: the five fall classes plus
/// a trailing no_fall bucket for falls the screen dismissed.
pub fn fall_report_labels() -> Vec<String> {
    let mut labels: Vec<String> = FallClass::ALL.iter().map(|c| c.name().to_string()).collect();
    labels.push("no_fall".to_string());
    labels
}

#[derive(Debug, Clone)]
pub struct CascadeEvaluation {
    /// Screen-level fall vs no-fall over every test sample; routed
    /// uncertain samples count as fall calls.
    pub binary: ClassificationReport,
    /// Five-class report over ground-truth falls only; screen misses land
    /// in the no_fall column and count against their true class.
    pub falls: ClassificationReport,
}

pub fn evaluate(model: &CascadeModel, test: &[FeatureVector]) -> Result<CascadeEvaluation> {
    if test.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty test set".into()));
    }
    let x = crate::data::feature_matrix(test);
    let predictions = model.predict_batch(&x)?;

    let binary_truth: Vec<usize> = test.iter().map(|fv| fv.binary_label as usize).collect();
    let binary_pred: Vec<usize> = predictions
        .iter()
        .map(|p| usize::from(!matches!(p, Prediction::NoFall)))
        .collect();
    let binary = ClassificationReport::from_pairs(
        &binary_truth,
        &binary_pred,
        &BINARY_REPORT_LABELS.map(String::from),
    )?;

    let mut fall_truth = Vec::new();
    let mut fall_pred = Vec::new();
    for (fv, pred) in test.iter().zip(&predictions) {
        let Some(class) = fv.multi_label else { continue };
        fall_truth.push(class as usize);
        fall_pred.push(match pred {
            Prediction::Fall(c) => c.index(),
            Prediction::NoFall => FALL_CLASS_COUNT,
        });
    }
    if fall_truth.is_empty() {
        return Err(Error::Data("test set has no fall samples to evaluate".into()));
    }
    let falls = ClassificationReport::from_pairs(&fall_truth, &fall_pred, &fall_report_labels())?;
    Ok(CascadeEvaluation { binary, falls })
}
