//! Run configuration: one JSON document covering data source, split,
//! label cleaning and training, resolved from (in order of increasing
//! precedence) built-in defaults, the `--config` file, the `--fast`
//! preset, `--set` dotted-key overrides, and the `--input`/`--seed`
//! flags. The resolved document is echoed to every output directory as
//! `resolved_config.json`, from which the run can be re-created exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cascade::{CleaningSettings, PipelineSettings, TrainConfig};
use crate::data::{
    parse_keypoint_csv, preprocess_frames, read_features_csv, synthesize_dataset, FeatureVector,
    PreprocessParams, SplitSpec, SynthConfig,
};
use crate::error::{Error, Result};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

/// Where training and evaluation samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    /// Generated Gaussian-cluster dataset; labels exact by construction.
    Synth(SynthConfig),
    /// Processed feature CSV with label columns.
    Features { path: PathBuf },
    /// Raw keypoint CSV; run through preprocessing first.
    Keypoints { path: PathBuf },
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig::Synth(SynthConfig::default())
    }
}

/// Label-cleaning section: the fold-classifier settings plus a switch so
/// a config file can turn the stage off without losing its tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub enabled: bool,
    pub folds: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        let s = CleaningSettings::default();
        CleaningConfig { enabled: true, folds: s.folds, epochs: s.epochs, batch: s.batch, lr: s.lr }
    }
}

impl CleaningConfig {
    pub fn settings(&self) -> CleaningSettings {
        CleaningSettings { folds: self.folds, epochs: self.epochs, batch: self.batch, lr: self.lr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub input: InputConfig,
    pub split: SplitSpec,
    pub cleaning: CleaningConfig,
    pub preprocess: PreprocessParams,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.split.validate()?;
        self.preprocess.validate()?;
        if self.cleaning.enabled {
            self.cleaning.settings().validate()?;
        }
        match &self.input {
            InputConfig::Synth(s) => s.validate()?,
            InputConfig::Features { path } | InputConfig::Keypoints { path } => {
                if path.as_os_str().is_empty() {
                    return Err(Error::Config("input path must not be empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Loads the configured data source as labeled feature vectors.
    pub fn load_input(&self) -> Result<Vec<FeatureVector>> {
        match &self.input {
            InputConfig::Synth(s) => synthesize_dataset(s),
            InputConfig::Features { path } => read_features_csv(path),
            InputConfig::Keypoints { path } => {
                let frames = parse_keypoint_csv(path)?;
                preprocess_frames(frames, &self.preprocess)
            }
        }
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        PipelineSettings {
            train: self.train.clone(),
            split: self.split,
            cleaning: self.cleaning.enabled.then(|| self.cleaning.settings()),
        }
    }

    pub fn to_pretty_json(&self) -> String {
        // RunConfig serializes infallibly: no maps with non-string keys.
        let mut s = serde_json::to_string_pretty(self).expect("config serialization");
        s.push('\n');
        s
    }

    /// Echoes the resolved config into `dir` so the run is re-creatable.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(RESOLVED_CONFIG_FILE), self.to_pretty_json())?;
        Ok(())
    }
}

/// Command-line adjustments applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Test profile: epochs 30/60 with learning rate 1e-3 and screening
    /// batch 128 so the shortened schedule still converges.
    pub fast: bool,
    /// `key=value` pairs with dotted keys, e.g. `train.m=0`.
    pub set: Vec<String>,
    /// Replaces the input section with a feature-CSV source.
    pub input: Option<PathBuf>,
    /// Sets the training, split and synth seeds in one step.
    pub seed: Option<u64>,
}

const FAST_EPOCHS_BFC: u64 = 30;
const FAST_EPOCHS_MFEC: u64 = 60;
const FAST_LR: f64 = 1e-3;
const FAST_BATCH_BFC: u64 = 128;

fn json_object<'a>(v: &'a mut Value, what: &str) -> Result<&'a mut serde_json::Map<String, Value>> {
    v.as_object_mut()
        .ok_or_else(|| Error::Config(format!("{what} must be a JSON object")))
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("--set key `{key}` has an empty segment")));
    }
    let mut node = root;
    for (i, part) in parts.iter().enumerate() {
        let map = json_object(node, &parts[..i].join("."))
            .map_err(|_| Error::Config(format!(
                "--set key `{key}`: `{}` is not an object",
                parts[..i].join(".")
            )))?;
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("set_path loop always returns on the last segment");
}

fn apply_set(root: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{spec}`")))?;
    // Values parse as JSON when they can (numbers, bools, arrays), and
    // fall back to plain strings (file paths, label names).
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    set_path(root, key, value)
}

fn apply_fast(root: &mut Value) -> Result<()> {
    let train = json_object(root, "config")?
        .entry("train")
        .or_insert_with(|| Value::Object(Default::default()));
    let train = json_object(train, "train")?;
    train.insert("epochs_bfc".into(), FAST_EPOCHS_BFC.into());
    train.insert("epochs_mfec".into(), FAST_EPOCHS_MFEC.into());
    train.insert("lr".into(), FAST_LR.into());
    train.insert("batch_bfc".into(), FAST_BATCH_BFC.into());
    Ok(())
}

fn apply_seed(root: &mut Value, seed: u64) -> Result<()> {
    for section in ["train", "split"] {
        let node = json_object(root, "config")?
            .entry(section)
            .or_insert_with(|| Value::Object(Default::default()));
        json_object(node, section)?.insert("seed".into(), seed.into());
    }
    let map = json_object(root, "config")?;
    let input = map.entry("input").or_insert_with(|| serde_json::json!({ "synth": {} }));
    if let Some(synth) = json_object(input, "input")?.get_mut("synth") {
        json_object(synth, "input.synth")?.insert("seed".into(), seed.into());
    }
    Ok(())
}

/// Builds the effective config. Layering order: defaults, then the file,
/// then `--fast`, then each `--set` in argument order, then `--input`,
/// then `--seed`. The result is validated before it is returned.
pub fn resolve_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut doc: Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config {}: {e}", p.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(Error::Config("config root must be a JSON object".into()));
    }
    if overrides.fast {
        apply_fast(&mut doc)?;
    }
    for spec in &overrides.set {
        apply_set(&mut doc, spec)?;
    }
    if let Some(input) = &overrides.input {
        set_path(&mut doc, "input", serde_json::json!({ "features": { "path": input } }))?;
    }
    if let Some(seed) = overrides.seed {
        apply_seed(&mut doc, seed)?;
    }
    let cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
