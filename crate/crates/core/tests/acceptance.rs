//! System-level checks: oracle comparisons against independent
//! reimplementations, directional behavior of the uncertainty band, and
//! reproducibility of full runs. Each test prints one summary line when it
//! passes; assertion messages carry the numbers when it fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fall_cascade::cascade::{
    build_binary_map, decide, derive_multiclass_set, fall_probabilities, run_full_pipeline,
    train_bfc, train_mfec, CascadeModel, Decision, PipelineSettings, Prediction, TrainConfig,
};
use fall_cascade::cleaning::{clean_label, clean_labels, NetFoldClassifier};
use fall_cascade::config::{resolve_config, Overrides};
use fall_cascade::data::{
    self, feature_matrix, normalize, remove_blank_frames, select_primary_subject,
    synthesize_dataset, ActivityCode, FeatureVector, Keypoint, PreprocessParams, Provenance,
    SkeletonFrame, SplitSpec, SynthConfig, FEATURE_DIM, KEYPOINT_COUNT,
};
use fall_cascade::matrix::Matrix;
use fall_cascade::metrics;
use fall_cascade::net::{
    build_network, loss_and_grads, loss_bfc, loss_mfec, HeadActivation, LayerSpec, Network,
    Targets,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, StandardNormal.sample(rng));
        }
    }
    m
}

// ---------------------------------------------------------------- gradients

fn random_arch(rng: &mut ChaCha8Rng, class_count: usize) -> Vec<LayerSpec> {
    let act = if class_count == 1 { HeadActivation::Sigmoid } else { HeadActivation::Softmax };
    let mut arch = Vec::new();
    for block in 0..3 {
        arch.push(LayerSpec::Dense { width: rng.gen_range(3..=8) });
        if rng.gen_bool(0.7) {
            arch.push(LayerSpec::BatchNorm);
        }
        arch.push(LayerSpec::Relu);
        arch.push(LayerSpec::Head { activation: act });
        if block < 2 && rng.gen_bool(0.5) {
            arch.push(LayerSpec::ConcatInput);
        }
    }
    arch
}

fn loss_of(net: &Network, batch: &Matrix, targets: Targets<'_>) -> f64 {
    let mut n = net.clone();
    let (heads, _) = n.train_forward(batch).unwrap();
    loss_and_grads(&heads, targets, n.head_weights()).unwrap().0
}

/// Central finite differences over every parameter; returns the largest
/// relative error. Near-zero gradients are compared with a 1e-2 floor in
/// the denominator so difference noise does not dominate.
fn max_fd_rel_error(net: &Network, batch: &Matrix, targets: Targets<'_>, step: f64) -> f64 {
    let mut n = net.clone();
    let (heads, cache) = n.train_forward(batch).unwrap();
    let (_, dz) = loss_and_grads(&heads, targets, n.head_weights()).unwrap();
    let analytic: Vec<f64> = n
        .backward(&cache, &dz)
        .unwrap()
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect();

    let mut worst = 0.0f64;
    let mut k = 0;
    for ti in 0..net.param_tensors().len() {
        for j in 0..net.param_tensors()[ti].len() {
            let mut plus = net.clone();
            plus.param_tensors_mut()[ti][j] += step;
            let mut minus = net.clone();
            minus.param_tensors_mut()[ti][j] -= step;
            let numeric =
                (loss_of(&plus, batch, targets) - loss_of(&minus, batch, targets)) / (2.0 * step);
            let a = analytic[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2));
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let mut r = rng(9000 + i);
        let class_count = if i % 2 == 0 { 1 } else { r.gen_range(2..=5) };
        let input_width = r.gen_range(4..=7);
        let arch = random_arch(&mut r, class_count);
        let net = build_network(input_width, class_count, &arch, [1.0, 1.0, 2.0], &mut r).unwrap();
        let batch = normal_batch(&mut r, 6, input_width);
        let rel = if class_count == 1 {
            let y: Vec<f64> = (0..6).map(|_| f64::from(r.gen_bool(0.5))).collect();
            max_fd_rel_error(&net, &batch, Targets::Binary(&y), 1e-4)
        } else {
            let y: Vec<usize> = (0..6).map(|_| r.gen_range(0..class_count)).collect();
            max_fd_rel_error(&net, &batch, Targets::Sparse(&y), 1e-4)
        };
        assert!(rel < 1e-4, "[FAIL] net {i}: gradient relative error {rel:.3e} >= 1e-4");
        worst = worst.max(rel);
    }
    let dt = t0.elapsed();
    assert!(dt.as_secs_f64() < 30.0, "[FAIL] gradient check took {dt:.1?}, budget 30s");
    println!("[PASS] gradients match finite differences on 20 nets (worst rel {worst:.2e}, {dt:.1?})");
}

// ---------------------------------------------------------- loss identities

#[test]
fn loss_identities_hold() {
    let omega = [0.25, 0.25, 0.5];
    let rows = 7;

    let half = Matrix::from_vec(rows, 1, vec![0.5; rows]);
    let heads = vec![half.clone(), half.clone(), half];
    let y: Vec<f64> = (0..rows).map(|r| f64::from(r % 2 == 0)).collect();
    let (l2, _) = loss_bfc(&heads, &y, omega).unwrap();
    let ln2 = std::f64::consts::LN_2;
    assert!((l2 - ln2).abs() < 1e-9, "[FAIL] uniform binary loss {l2} != ln 2 {ln2}");

    let fifth = Matrix::from_vec(rows, 5, vec![0.2; rows * 5]);
    let heads5 = vec![fifth.clone(), fifth.clone(), fifth];
    let y5: Vec<usize> = (0..rows).map(|r| r % 5).collect();
    let (l5, _) = loss_mfec(&heads5, &y5, omega).unwrap();
    let ln5 = 5f64.ln();
    assert!((l5 - ln5).abs() < 1e-9, "[FAIL] uniform 5-class loss {l5} != ln 5 {ln5}");

    // The published ratio 1:1:2 normalizes to 0.25/0.25/0.5.
    let mut r = rng(41);
    let arch = random_arch(&mut r, 1);
    let net = build_network(4, 1, &arch, [1.0, 1.0, 2.0], &mut r).unwrap();
    assert_eq!(net.head_weights(), omega, "[FAIL] head ratio 1:1:2 did not normalize");

    // Total loss decomposes into the weighted per-head means.
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let heads: Vec<Matrix> = (0..3)
            .map(|_| {
                let mut m = Matrix::zeros(rows, 1);
                for i in 0..rows {
                    m.set(i, 0, r.gen_range(0.02..0.98));
                }
                m
            })
            .collect();
        let y: Vec<f64> = (0..rows).map(|_| f64::from(r.gen_bool(0.5))).collect();
        let total = loss_bfc(&heads, &y, omega).unwrap().0;
        let by_hand: f64 = heads
            .iter()
            .zip(&omega)
            .map(|(h, &w)| {
                let mean: f64 = (0..rows)
                    .map(|i| {
                        let p = h.get(i, 0);
                        -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / rows as f64;
                w * mean
            })
            .sum();
        worst = worst.max((total - by_hand).abs());

        let heads5: Vec<Matrix> = (0..3)
            .map(|_| {
                let mut m = Matrix::zeros(rows, 5);
                for i in 0..rows {
                    for j in 0..5 {
                        m.set(i, j, r.gen_range(0.02..0.98));
                    }
                }
                m
            })
            .collect();
        let y5: Vec<usize> = (0..rows).map(|_| r.gen_range(0..5)).collect();
        let total5 = loss_mfec(&heads5, &y5, omega).unwrap().0;
        let by_hand5: f64 = heads5
            .iter()
            .zip(&omega)
            .map(|(h, &w)| {
                let mean: f64 =
                    (0..rows).map(|i| -h.get(i, y5[i]).ln()).sum::<f64>() / rows as f64;
                w * mean
            })
            .sum();
        worst = worst.max((total5 - by_hand5).abs());
    }
    assert!(worst < 1e-12, "[FAIL] weighted head decomposition off by {worst:.3e}");
    println!("[PASS] uniform losses hit ln 2 / ln 5; weighted head sum matches within {worst:.1e}");
}

// ------------------------------------------------------ screening quality

#[test]
fn screen_meets_accuracy_and_recall_on_default_synth() {
    let t0 = Instant::now();
    let cfg =
        resolve_config(None, &Overrides { fast: true, seed: Some(0), ..Default::default() })
            .unwrap();
    let data = cfg.load_input().unwrap();
    let falls = data.iter().filter(|fv| fv.binary_label == 1).count();
    assert_eq!(data.len(), 4998);
    assert_eq!(falls, 150);

    let (train, test) = data::split(&data, &cfg.split).unwrap();
    let (bfc, _) = train_bfc(&train, &cfg.train).unwrap();
    let probs = fall_probabilities(&bfc, &feature_matrix(&test)).unwrap();

    let mut correct = 0usize;
    let mut fall_total = 0usize;
    let mut fall_hit = 0usize;
    for (fv, &p) in test.iter().zip(&probs) {
        let pred = u8::from(p >= 0.5);
        correct += usize::from(pred == fv.binary_label);
        if fv.binary_label == 1 {
            fall_total += 1;
            fall_hit += usize::from(pred == 1);
        }
    }
    let accuracy = correct as f64 / test.len() as f64;
    let recall = fall_hit as f64 / fall_total as f64;
    let dt = t0.elapsed();
    assert!(recall >= 0.99, "[FAIL] held-out fall recall {recall:.4} < 0.99");
    assert!(accuracy >= 0.99, "[FAIL] held-out accuracy {accuracy:.4} < 0.99");
    assert!(dt.as_secs_f64() < 300.0, "[FAIL] screen training took {dt:.0?}, budget 5 min");
    println!(
        "[PASS] screen on default synth: accuracy {accuracy:.4}, fall recall {recall:.4} \
         over {} held-out samples ({dt:.0?})",
        test.len()
    );
}

// -------------------------------------------------------- cascade quality

#[test]
fn pipeline_reaches_fall_macro_f1() {
    let t0 = Instant::now();
    let cfg =
        resolve_config(None, &Overrides { fast: true, seed: Some(0), ..Default::default() })
            .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let outcome =
        run_full_pipeline(cfg.load_input().unwrap(), &cfg.pipeline_settings(), dir.path())
            .unwrap();
    let macro_f1 = outcome.evaluation.falls.macro_f1;
    let dt = t0.elapsed();
    assert!(macro_f1 >= 0.95, "[FAIL] fall-type macro F1 {macro_f1:.4} < 0.95");
    println!(
        "[PASS] full pipeline fall-type macro F1 {macro_f1:.4} over {} held-out samples ({dt:.0?})",
        outcome.test_size
    );
}

// -------------------------------------------------- uncertainty band value

const BOUNDARY_SEPARATION: f64 = 2.2;

fn boundary_worst_fall_f1(seed: u64, m: f64, n: f64, dir: &Path) -> f64 {
    let synth = SynthConfig {
        seed,
        per_class_counts: [80, 80, 80, 80, 80, 200, 200, 200, 200, 200, 200],
        separation: BOUNDARY_SEPARATION,
        noise_sigma: 0.5,
    };
    let settings = PipelineSettings {
        train: TrainConfig {
            lr: 1e-3,
            batch_bfc: 128,
            epochs_bfc: 30,
            epochs_mfec: 60,
            m,
            n,
            seed,
            ..TrainConfig::default()
        },
        split: SplitSpec { seed, ..SplitSpec::default() },
        cleaning: None,
    };
    let data = synthesize_dataset(&synth).unwrap();
    let outcome = run_full_pipeline(data, &settings, dir).unwrap();
    outcome.evaluation.falls.f1[..5].iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn uncertainty_band_helps_on_boundary_synth() {
    let t0 = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let mut wins = 0u32;
    let mut pairs = Vec::new();
    for seed in 0..10u64 {
        let banded = boundary_worst_fall_f1(seed, 0.03, 0.02, &base.path().join(format!("b{seed}")));
        let flat = boundary_worst_fall_f1(seed, 0.0, 0.0, &base.path().join(format!("f{seed}")));
        wins += u32::from(banded >= flat);
        pairs.push(format!("{banded:.3}/{flat:.3}"));
    }
    let dt = t0.elapsed();
    assert!(
        wins >= 8,
        "[FAIL] banded thresholds kept worst fall-class F1 in only {wins}/10 trials: {pairs:?}"
    );
    println!(
        "[PASS] m=0.03/n=0.02 kept worst fall-class F1 vs m=n=0 in {wins}/10 trials ({dt:.0?})"
    );
}

// ------------------------------------------------------- screen filtering

#[test]
fn no_fall_decisions_never_reach_second_stage() {
    let synth = SynthConfig {
        seed: 5,
        per_class_counts: [8, 8, 8, 8, 8, 40, 40, 40, 40, 40, 40],
        separation: 5.0,
        noise_sigma: 0.5,
    };
    let data = synthesize_dataset(&synth).unwrap();
    let cfg = TrainConfig {
        lr: 2e-3,
        batch_bfc: 64,
        epochs_bfc: 30,
        epochs_mfec: 40,
        seed: 5,
        ..TrainConfig::default()
    };
    let (bfc, _) = train_bfc(&data, &cfg).unwrap();
    let qbin = build_binary_map(&bfc, &data, cfg.m, cfg.n).unwrap();
    let (subset, labels) = derive_multiclass_set(&data, &qbin).unwrap();
    let (mfec, _) = train_mfec(&subset, &labels, &cfg).unwrap();
    let model = CascadeModel::new(bfc, mfec, cfg).unwrap();

    let mut r = rng(99);
    let total = 10_000usize;
    let mut no_fall_seen = 0usize;
    let mut routed_expected = 0u64;
    for chunk in 0..5 {
        let rows = total / 5;
        let vals: Vec<f64> =
            (0..rows * FEATURE_DIM).map(|_| r.gen_range(-8.0..8.0)).collect();
        let x = Matrix::from_vec(rows, FEATURE_DIM, vals);
        let probs = fall_probabilities(&model.bfc, &x).unwrap();
        let preds = model.predict_batch(&x).unwrap();
        for (i, (&p, pred)) in probs.iter().zip(&preds).enumerate() {
            if decide(p, model.config.m, model.config.n) == Decision::NoFall {
                no_fall_seen += 1;
                assert_eq!(
                    *pred,
                    Prediction::NoFall,
                    "[FAIL] chunk {chunk} row {i}: no-fall decision predicted a fall type"
                );
            } else {
                routed_expected += 1;
            }
        }
    }
    assert_eq!(
        model.mfec_calls(),
        routed_expected,
        "[FAIL] second stage ran {} times for {routed_expected} routed samples",
        model.mfec_calls()
    );
    assert!(no_fall_seen > 0, "[FAIL] no sample was ever decided no-fall");
    println!(
        "[PASS] {no_fall_seen} of {total} random samples decided no-fall triggered zero \
         second-stage calls ({routed_expected} routed)"
    );
}

// --------------------------------------------------------- label cleaning

#[test]
fn label_cleaning_catches_injected_noise() {
    let t0 = Instant::now();
    let synth =
        SynthConfig { seed: 11, per_class_counts: [60; 11], separation: 5.0, noise_sigma: 0.5 };
    let clean_data = synthesize_dataset(&synth).unwrap();
    let n = clean_data.len();

    let mut r = rng(12);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, r.gen_range(0..=i));
    }
    let corrupted: BTreeSet<usize> = order[..n / 10].iter().copied().collect();
    let mut noisy = clean_data.clone();
    for &i in &corrupted {
        let old = clean_label(&noisy[i]);
        let new = loop {
            let c = r.gen_range(0..6usize);
            if c != old {
                break c;
            }
        };
        let code = if new == 0 { r.gen_range(6..=11u8) } else { new as u8 };
        noisy[i] = FeatureVector::new(
            noisy[i].values,
            ActivityCode::new(code).unwrap(),
            noisy[i].provenance,
        )
        .unwrap();
    }

    let (_, report) = clean_labels(noisy, 5, &NetFoldClassifier::default(), 77).unwrap();
    let flagged: BTreeSet<usize> =
        report.samples.iter().filter(|s| s.flagged).map(|s| s.index).collect();
    let caught = flagged.intersection(&corrupted).count();
    let false_flags = flagged.len() - caught;
    let clean_count = n - corrupted.len();
    assert!(
        caught as f64 >= 0.8 * corrupted.len() as f64,
        "[FAIL] caught {caught} of {} corrupted labels, need 80%",
        corrupted.len()
    );
    assert!(
        (false_flags as f64) <= 0.05 * clean_count as f64,
        "[FAIL] {false_flags} of {clean_count} clean samples flagged, cap 5%"
    );

    let (_, zero) = clean_labels(clean_data, 5, &NetFoldClassifier::default(), 77).unwrap();
    assert!(
        (zero.flagged_total as f64) <= 0.02 * n as f64,
        "[FAIL] {} of {n} flagged with no injected noise, cap 2%",
        zero.flagged_total
    );
    let dt = t0.elapsed();
    println!(
        "[PASS] cleaning caught {caught}/{} injected label errors, {false_flags} false flags, \
         {} flags on clean data ({dt:.0?})",
        corrupted.len(),
        zero.flagged_total
    );
}

// ---------------------------------------------------------- preprocessing

fn frame_at(provenance: Provenance, r: &mut ChaCha8Rng, scale: f64) -> SkeletonFrame {
    let cx = r.gen_range(200.0..1800.0);
    let cy = r.gen_range(200.0..1000.0);
    let mut keypoints = [Keypoint { x: 0.0, y: 0.0, confidence: 0.9 }; KEYPOINT_COUNT];
    for kp in &mut keypoints {
        kp.x = cx + scale * r.gen_range(-60.0..60.0);
        kp.y = cy + scale * r.gen_range(-100.0..100.0);
        kp.confidence = r.gen_range(0.3..1.0);
    }
    SkeletonFrame { provenance, activity: ActivityCode::new(7).unwrap(), keypoints }
}

#[test]
fn preprocessing_properties_hold() {
    let params = PreprocessParams::default();
    let mut r = rng(21);

    // One detection survives per (camera, frame), even with bystanders.
    let mut frames = Vec::new();
    for f in 0..6u32 {
        let p = Provenance { camera_id: 1, subject_id: 3, trial_id: 2, frame_id: f };
        frames.push(frame_at(p, &mut r, 1.0));
        frames.push(frame_at(p, &mut r, 0.4));
        frames.push(frame_at(p, &mut r, 0.2));
        let other_cam = Provenance { camera_id: 2, ..p };
        frames.push(frame_at(other_cam, &mut r, 1.0));
    }
    let kept = select_primary_subject(frames, &params).unwrap();
    let provenances: BTreeSet<Provenance> = kept.iter().map(|f| f.provenance).collect();
    assert_eq!(kept.len(), provenances.len(), "[FAIL] duplicate detections survived selection");
    assert_eq!(kept.len(), 12, "[FAIL] expected one detection per camera-frame pair");

    // Features ignore where the camera put the subject and how large the
    // pixel frame is.
    let mut worst = 0.0f64;
    for t in 0..20u64 {
        let p = Provenance { camera_id: 0, subject_id: 1, trial_id: 1, frame_id: t as u32 };
        let frame = frame_at(p, &mut r, 1.0);
        let base = normalize(&frame, &params).unwrap();
        let dx = r.gen_range(-400.0..400.0);
        let dy = r.gen_range(-400.0..400.0);
        let s = r.gen_range(0.2..30.0);
        let mut moved = frame.clone();
        for kp in &mut moved.keypoints {
            kp.x = s * (kp.x + dx);
            kp.y = s * (kp.y + dy);
        }
        let shifted = normalize(&moved, &params).unwrap();
        for (a, b) in base.values.iter().zip(&shifted.values) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst < 1e-12, "[FAIL] normalized features moved by {worst:.3e} under translation/scale");

    // Exactly k_min confident keypoints is enough to keep a frame; one
    // fewer is not. Confidence equal to c_min does not count.
    let p = Provenance { camera_id: 0, subject_id: 1, trial_id: 1, frame_id: 900 };
    let mut boundary = frame_at(p, &mut r, 1.0);
    for (i, kp) in boundary.keypoints.iter_mut().enumerate() {
        kp.confidence = if i < params.k_min { 0.9 } else { 0.05 };
    }
    assert_eq!(remove_blank_frames(vec![boundary.clone()], &params).len(), 1);
    boundary.keypoints[0].confidence = params.c_min;
    assert_eq!(
        remove_blank_frames(vec![boundary], &params).len(),
        0,
        "[FAIL] frame with {} confident keypoints kept, threshold is {}",
        params.k_min - 1,
        params.k_min
    );
    println!(
        "[PASS] primary-subject uniqueness, translation/scale invariance (worst {worst:.1e}), \
         and the confident-keypoint boundary all hold"
    );
}

// ---------------------------------------------------------- reproducibility

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let t0 = Instant::now();
    let bin = env!("CARGO_BIN_EXE_fall-cascade");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"input": {"synth": {"per_class_counts": [30, 30, 30, 30, 30, 150, 150, 150, 150, 150, 150]}}}"#,
    )
    .unwrap();

    for run in ["a", "b"] {
        let out = std::process::Command::new(bin)
            .args(["pipeline", "--config"])
            .arg(&cfg_path)
            .args(["--fast", "--seed", "7", "--out"])
            .arg(dir.path().join(run))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "[FAIL] pipeline run {run} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }

    let list = |name: &str| -> Vec<String> {
        let mut files: Vec<String> = std::fs::read_dir(dir.path().join(name))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        files.sort();
        files
    };
    let files = list("a");
    assert_eq!(files, list("b"), "[FAIL] the two runs wrote different artifact sets");
    for required in ["bfc.json", "mfec.json", "cascade.json", "binary_report.csv", "fall_report.csv", "cleaning.csv", "resolved_config.json"] {
        assert!(files.iter().any(|f| f == required), "[FAIL] run wrote no {required}");
    }
    for f in &files {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "[FAIL] {f} differs between identically seeded runs");
    }
    let dt = t0.elapsed();
    println!(
        "[PASS] two seed-7 runs wrote {} byte-identical files ({dt:.0?})",
        files.len()
    );
}

// ----------------------------------------------------------------- metrics

#[test]
fn metrics_match_brute_force() {
    let mut r = rng(31);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let classes = r.gen_range(2..=7usize);
        let mut matrix = vec![vec![0u64; classes]; classes];
        for row in &mut matrix {
            for cell in row.iter_mut() {
                *cell = r.gen_range(0..=100);
            }
        }
        // Make empty rows and columns a regular occurrence.
        if trial % 3 == 0 {
            let dead = r.gen_range(0..classes);
            matrix[dead] = vec![0; classes];
        }
        if trial % 4 == 0 {
            let dead = r.gen_range(0..classes);
            for row in &mut matrix {
                row[dead] = 0;
            }
        }
        let labels: Vec<String> = (0..classes).map(|c| format!("class{c}")).collect();
        let rep = metrics::report(&matrix, &labels).unwrap();

        // Independent tally from expanded truth/prediction pairs.
        let mut tp = vec![0u64; classes];
        let mut fp = vec![0u64; classes];
        let mut fnd = vec![0u64; classes];
        for t in 0..classes {
            for p in 0..classes {
                let count = matrix[t][p];
                if t == p {
                    tp[t] += count;
                } else {
                    fp[p] += count;
                    fnd[t] += count;
                }
            }
        }
        let mut f1_sum = 0.0;
        let mut live = 0usize;
        for c in 0..classes {
            let prec =
                if tp[c] + fp[c] > 0 { tp[c] as f64 / (tp[c] + fp[c]) as f64 } else { 0.0 };
            let rec =
                if tp[c] + fnd[c] > 0 { tp[c] as f64 / (tp[c] + fnd[c]) as f64 } else { 0.0 };
            let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
            worst = worst.max((rep.precision[c] - prec).abs());
            worst = worst.max((rep.recall[c] - rec).abs());
            worst = worst.max((rep.f1[c] - f1).abs());
            if tp[c] + fnd[c] > 0 {
                f1_sum += f1;
                live += 1;
            }
        }
        let macro_f1 = if live > 0 { f1_sum / live as f64 } else { 0.0 };
        worst = worst.max((rep.macro_f1 - macro_f1).abs());
    }
    assert!(worst < 1e-12, "[FAIL] report deviates from brute force by {worst:.3e}");

    // Published screening confusion counts: 1788 of 1803 falls caught.
    let matrix = vec![vec![10, 0], vec![15, 1788]];
    let labels = ["no_fall", "fall"].map(String::from);
    let rep = metrics::report(&matrix, &labels).unwrap();
    let expect = 1788.0 / 1803.0;
    assert!(
        (rep.recall[1] - expect).abs() < 1e-12,
        "[FAIL] fixture fall recall {} != {expect}",
        rep.recall[1]
    );
    assert_eq!(format!("{:.4}", rep.recall[1]), "0.9917");
    println!(
        "[PASS] metrics match brute force on 50 random matrices (worst {worst:.1e}); \
         fixture fall recall {:.4}",
        rep.recall[1]
    );
}
