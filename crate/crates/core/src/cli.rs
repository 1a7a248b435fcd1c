//! Command-line surface: one subcommand per pipeline stage plus an
//! end-to-end `pipeline` run. Every command resolves its configuration
//! before touching data and echoes the result to the output directory.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 training error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cascade::{
    self, build_binary_map, derive_multiclass_set, evaluate, fall_probabilities, train_bfc,
    train_mfec, CascadeModel, TrainConfig, BFC_MODEL_FILE, BINARY_REPORT_LABELS, MFEC_MODEL_FILE,
};
use crate::cleaning;
use crate::config::{resolve_config, InputConfig, Overrides, RunConfig, RESOLVED_CONFIG_FILE};
use crate::data::{
    self, feature_matrix, parse_keypoint_csv, preprocess_frames, read_feature_values_csv,
    read_features_csv, write_features_csv, FeatureVector, FEATURE_DIM,
};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::metrics::ClassificationReport;
use crate::net;
use crate::seed::subseed;
use crate::Error;

pub const DATASET_FILE: &str = "dataset.csv";
pub const PROCESSED_FILE: &str = "processed.csv";
pub const CLEANED_FILE: &str = "cleaned.csv";

#[derive(Parser)]
#[command(
    name = "fall-cascade",
    version,
    about = "Two-stage fall event classification over 2D skeleton keypoints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration flags shared by every command that trains or generates.
#[derive(Args)]
struct RunOpts {
    /// JSON run configuration; `{}` selects the built-in defaults
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Shortened training schedule (epochs 30/60, lr 1e-3, batch 128)
    #[arg(long)]
    fast: bool,
    /// Dotted-key config override, e.g. `train.m=0`; repeatable
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seed for data synthesis, splitting and training in one step
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

impl RunOpts {
    fn resolve(&self, input: Option<&PathBuf>) -> Result<RunConfig> {
        resolve_config(
            Some(&self.config),
            &Overrides {
                fast: self.fast,
                set: self.set.clone(),
                input: input.cloned(),
                seed: self.seed,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset from the config's input section
    Synth {
        #[command(flatten)]
        opts: RunOpts,
        /// Output directory for dataset.csv
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Preprocess a raw keypoint CSV into normalized feature rows
    Prep {
        /// JSON run configuration; defaults apply when omitted
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Dotted-key config override, e.g. `preprocess.k_min=6`; repeatable
        #[arg(long, value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Raw keypoint CSV (one detection per line)
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output directory for processed.csv
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Flag likely-mislabeled samples and write the cleaned dataset
    CleanLabels {
        #[command(flatten)]
        opts: RunOpts,
        /// Labeled feature CSV; overrides the config's input section
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the binary screening stage and report held-out performance
    TrainBfc {
        #[command(flatten)]
        opts: RunOpts,
        /// Labeled feature CSV; overrides the config's input section
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train the five-class fall-type stage behind an existing screen
    TrainMfec {
        #[command(flatten)]
        opts: RunOpts,
        /// Directory holding the trained screening model (bfc.json)
        #[arg(long, value_name = "DIR")]
        model: PathBuf,
        /// Labeled feature CSV; overrides the config's input section
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run cleaning, splitting, both training stages and evaluation
    Pipeline {
        #[command(flatten)]
        opts: RunOpts,
        /// Labeled feature CSV; overrides the config's input section
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Evaluate a saved cascade on a labeled feature CSV
    Eval {
        /// Directory holding a saved cascade model
        #[arg(long, value_name = "DIR")]
        model: PathBuf,
        /// Labeled feature CSV
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Optional directory for report files
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Print the predicted class name for each input row
    Predict {
        /// Directory holding a saved cascade model
        #[arg(long, value_name = "DIR")]
        model: PathBuf,
        /// Feature CSV; label columns may be blank
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
}

/// Parses arguments and runs the selected command, reporting errors on
/// stderr. Returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests arrive as "errors" but exit 0.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { opts, out } => synth(&opts, &out),
        Command::Prep { config, set, input, out } => prep(config.as_deref(), set, &input, &out),
        Command::CleanLabels { opts, input, out } => clean_labels(&opts, input.as_ref(), &out),
        Command::TrainBfc { opts, input, out } => run_train_bfc(&opts, input.as_ref(), &out),
        Command::TrainMfec { opts, model, input, out } => {
            run_train_mfec(&opts, &model, input.as_ref(), &out)
        }
        Command::Pipeline { opts, input, out } => pipeline(&opts, input.as_ref(), &out),
        Command::Eval { model, input, out } => eval(&model, &input, out.as_deref()),
        Command::Predict { model, input } => predict(&model, &input),
    }
}

fn synth(opts: &RunOpts, out: &Path) -> Result<()> {
    let cfg = opts.resolve(None)?;
    let InputConfig::Synth(synth) = &cfg.input else {
        return Err(Error::Config(
            "synth needs a synth input section; adjust it via --set input.synth.<field>=...".into(),
        ));
    };
    let data = data::synthesize_dataset(synth)?;
    cfg.write_resolved(out)?;
    write_features_csv(&out.join(DATASET_FILE), &data)?;
    let falls = data.iter().filter(|fv| fv.binary_label == 1).count();
    println!(
        "wrote {} samples ({falls} falls) to {}",
        data.len(),
        out.join(DATASET_FILE).display()
    );
    Ok(())
}

fn prep(config: Option<&Path>, set: Vec<String>, input: &PathBuf, out: &Path) -> Result<()> {
    let mut cfg = resolve_config(config, &Overrides { set, ..Default::default() })?;
    // Recording the source in the echoed config makes the run re-creatable
    // from the output directory alone.
    cfg.input = InputConfig::Keypoints { path: input.clone() };
    let frames = parse_keypoint_csv(input)?;
    let detections = frames.len();
    let features = preprocess_frames(frames, &cfg.preprocess)?;
    cfg.write_resolved(out)?;
    write_features_csv(&out.join(PROCESSED_FILE), &features)?;
    println!(
        "kept {} of {detections} detections; wrote {}",
        features.len(),
        out.join(PROCESSED_FILE).display()
    );
    Ok(())
}

fn clean_labels(opts: &RunOpts, input: Option<&PathBuf>, out: &Path) -> Result<()> {
    let cfg = opts.resolve(input)?;
    let data = cfg.load_input()?;
    let total = data.len();
    let (kept, report) = cleaning::clean_labels(
        data,
        cfg.cleaning.folds,
        &cfg.cleaning.settings().classifier(),
        subseed(cfg.train.seed, "clean"),
    )?;
    cfg.write_resolved(out)?;
    write_features_csv(&out.join(CLEANED_FILE), &kept)?;
    report.write_csv(&out.join("cleaning.csv"))?;
    report.write_json_summary(&out.join("cleaning.json"))?;
    println!(
        "flagged {} of {total} samples; wrote {} kept rows to {}",
        report.flagged_total,
        kept.len(),
        out.join(CLEANED_FILE).display()
    );
    Ok(())
}

fn run_train_bfc(opts: &RunOpts, input: Option<&PathBuf>, out: &Path) -> Result<()> {
    let cfg = opts.resolve(input)?;
    let data = cfg.load_input()?;
    let (train, test) = data::split(&data, &cfg.split)?;
    let (bfc, log) = train_bfc(&train, &cfg.train)?;
    cfg.write_resolved(out)?;
    net::save_model(&bfc, &out.join(BFC_MODEL_FILE))?;
    log.write_csv(&out.join("bfc_log.csv"))?;
    let report = binary_report(&bfc, &test)?;
    report.write_csv(&out.join("binary_report.csv"))?;
    report.write_json(&out.join("binary_report.json"))?;
    println!(
        "trained on {} samples; held-out screen performance over {}:",
        train.len(),
        test.len()
    );
    print!("{}", report.format_table());
    Ok(())
}

/// Screen-only report: fall-vs-no-fall at the plain 0.5 threshold.
fn binary_report(bfc: &net::Network, test: &[FeatureVector]) -> Result<ClassificationReport> {
    let probs = fall_probabilities(bfc, &feature_matrix(test))?;
    let truth: Vec<usize> = test.iter().map(|fv| fv.binary_label as usize).collect();
    let pred: Vec<usize> = probs.iter().map(|&p| usize::from(p >= 0.5)).collect();
    ClassificationReport::from_pairs(&truth, &pred, &BINARY_REPORT_LABELS.map(String::from))
}

fn run_train_mfec(opts: &RunOpts, model: &Path, input: Option<&PathBuf>, out: &Path) -> Result<()> {
    let cfg = opts.resolve(input)?;
    let data = cfg.load_input()?;
    let (train, _) = data::split(&data, &cfg.split)?;
    let bfc = net::load_model(&model.join(BFC_MODEL_FILE))?;
    let qbin = build_binary_map(&bfc, &train, cfg.train.m, cfg.train.n)?;
    let (subset, labels) = derive_multiclass_set(&train, &qbin)?;
    let (mfec, log) = train_mfec(&subset, &labels, &cfg.train)?;
    cfg.write_resolved(out)?;
    net::save_model(&mfec, &out.join(MFEC_MODEL_FILE))?;
    log.write_csv(&out.join("mfec_log.csv"))?;
    qbin.write_csv(&out.join("qbin.csv"))?;
    println!(
        "screen routed {} of {} training samples to the fall-type stage; wrote {}",
        subset.len(),
        train.len(),
        out.join(MFEC_MODEL_FILE).display()
    );
    Ok(())
}

fn pipeline(opts: &RunOpts, input: Option<&PathBuf>, out: &Path) -> Result<()> {
    let cfg = opts.resolve(input)?;
    let data = cfg.load_input()?;
    let outcome = cascade::run_full_pipeline(data, &cfg.pipeline_settings(), out)?;
    cfg.write_resolved(out)?;
    if let Some(cleaning) = &outcome.cleaning {
        println!(
            "label cleaning flagged {} of {} samples",
            cleaning.flagged_total,
            cleaning.samples.len()
        );
    }
    println!("trained on {} samples; evaluation over {}:", outcome.train_size, outcome.test_size);
    println!("binary screen:");
    print!("{}", outcome.evaluation.binary.format_table());
    println!("fall types (ground-truth falls):");
    print!("{}", outcome.evaluation.falls.format_table());
    println!(
        "fall-type stage invoked for {} of {} test samples",
        outcome.model.mfec_calls(),
        outcome.test_size
    );
    println!("model written to {}", out.display());
    Ok(())
}

/// What re-creates an evaluation: the model, the data, and the model's
/// embedded training configuration.
#[derive(serde::Serialize)]
struct EvalManifest<'a> {
    model: &'a Path,
    input: &'a Path,
    train: &'a TrainConfig,
}

fn eval(model_dir: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let model = CascadeModel::load(model_dir)?;
    let data = read_features_csv(input)?;
    let evaluation = evaluate(&model, &data)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let manifest = EvalManifest { model: model_dir, input, train: &model.config };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
        text.push('\n');
        std::fs::write(dir.join(RESOLVED_CONFIG_FILE), text)?;
        evaluation.binary.write_csv(&dir.join("binary_report.csv"))?;
        evaluation.binary.write_json(&dir.join("binary_report.json"))?;
        evaluation.falls.write_csv(&dir.join("fall_report.csv"))?;
        evaluation.falls.write_json(&dir.join("fall_report.json"))?;
    }
    println!("binary screen:");
    print!("{}", evaluation.binary.format_table());
    println!("fall types (ground-truth falls):");
    print!("{}", evaluation.falls.format_table());
    println!(
        "fall-type stage invoked for {} of {} samples",
        model.mfec_calls(),
        data.len()
    );
    Ok(())
}

fn predict(model_dir: &Path, input: &Path) -> Result<()> {
    let model = CascadeModel::load(model_dir)?;
    let rows = read_feature_values_csv(input)?;
    if rows.is_empty() {
        return Ok(());
    }
    let mut flat = Vec::with_capacity(rows.len() * FEATURE_DIM);
    for (values, _) in &rows {
        flat.extend_from_slice(values);
    }
    let x = Matrix::from_vec(rows.len(), FEATURE_DIM, flat);
    for prediction in model.predict_batch(&x)? {
        println!("{}", prediction.name());
    }
    Ok(())
}
