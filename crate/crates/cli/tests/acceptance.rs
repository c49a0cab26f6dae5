//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//! Every tolerance and threshold is pinned below.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chitin::audio_io::AudioClip;
use chitin::augment::{augment_dataset, pitch_shift, speed_change, AugmentSpec};
use chitin::dataset::{self, SynthSpec};
use chitin::evaluation::{
    build_locv_plan, condition_rows, evaluate, feature_importance, locv_plan_for_manifest, TrainPool,
};
use chitin::features::{
    build_feature_matrix, dct_ii, frame_count, hz_to_mel, idct_ii, MfccConfig, MfccExtractor, Standardizer,
};
use chitin::models::{
    encode_labels, gini, load_model, save_model, train, train_decision_tree, train_gbt, train_knn, train_random_forest,
    train_svm_rbf, Classifier, Family, ForestParams, GbtParams, ModelArtifact, ModelParams, SvmParams, TreeNode,
    TreeParams,
};
use chitin::Matrix;
use common::TestRng;

const SR: f64 = 44_100.0;

const DSP_TOL: f64 = 1e-6;
const DSP_SIGNALS: usize = 6;
const DSP_BUDGET: Duration = Duration::from_secs(10);
const MEL_TOL: f64 = 1e-12;
const DCT_TOL: f64 = 1e-9;
const CLASSIFIER_BUDGET: Duration = Duration::from_secs(60);
const SVM_BALANCE_TOL: f64 = 1e-3;
/// ULP-level slack for ratios that are exact in real arithmetic.
const RATIO_TOL: f64 = 1e-15;
const IMPORTANCE_SUM_TOL: f64 = 1e-9;
const CV_BUDGET: Duration = Duration::from_secs(180);
const MIN_AVERAGE: f64 = 0.80;
const MIN_KNN_AVERAGE: f64 = 0.90;
const ROUND_TRIP_PROBES: usize = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("DSP oracle equivalence", dsp_oracle),
        ("framing and scale identities", framing_identities),
        ("classifier oracles", classifier_oracles),
        ("protocol fidelity", protocol_fidelity),
        ("metric identities", metric_identities),
        ("importance contract", importance_contract),
        ("desk-scale experiment", desk_scale),
        ("determinism", determinism),
        ("augmentation laws", augmentation_laws),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.2}s) {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.2}s) {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn clip(samples: Vec<f64>) -> AudioClip<f64> {
    AudioClip::new(samples, SR).unwrap()
}

fn dsp_oracle() -> Outcome {
    let start = Instant::now();
    let cfg = MfccConfig::default();
    let ex = MfccExtractor::<f64>::new(&cfg, SR).map_err(|e| e.to_string())?;
    let mut rng = TestRng::new(101);
    let mut worst = 0.0f64;
    for s in 0..DSP_SIGNALS {
        // Shorter than one hop, so exactly one frame.
        let len = 200 + rng.below(300);
        let x: Vec<f64> = (0..len).map(|_| rng.range(-1.0, 1.0)).collect();
        let got = ex.compute(&clip(x.clone())).map_err(|e| e.to_string())?;
        let want = common::naive_mfcc(&x, SR, cfg.n_mfcc, cfg.n_fft, cfg.hop, cfg.n_mels);
        ensure!(got.n_frames() == 1 && want.len() == 1, "signal {s}: {} frames", got.n_frames());
        for (c, &w) in want[0].iter().enumerate() {
            worst = worst.max((got.coeffs.get(c, 0) - w).abs());
        }
    }
    ensure!(worst < DSP_TOL, "max coefficient deviation {worst:e}");
    let silent = ex.compute(&clip(vec![0.0; 4096])).map_err(|e| e.to_string())?;
    let c0 = -100.0 * 128f64.sqrt();
    for f in 0..silent.n_frames() {
        ensure!((silent.coeffs.get(0, f) - c0).abs() < DSP_TOL, "silent c0 {}", silent.coeffs.get(0, f));
        for c in 1..silent.n_mfcc() {
            ensure!(silent.coeffs.get(c, f).abs() < DSP_TOL, "silent c{c} {}", silent.coeffs.get(c, f));
        }
    }
    ensure!(start.elapsed() < DSP_BUDGET, "took {:?}", start.elapsed());
    Ok(format!("max deviation {worst:.1e}"))
}

fn framing_identities() -> Outcome {
    let ex = MfccExtractor::<f64>::new(&MfccConfig::default(), SR).map_err(|e| e.to_string())?;
    let frames = ex.compute(&clip(common::sine(440.0, SR, 44_100, 0.5))).map_err(|e| e.to_string())?;
    ensure!(frame_count(44_100, 512) == 87 && frames.n_frames() == 87, "{} frames", frames.n_frames());
    ensure!((hz_to_mel(1000.0) - 15.0).abs() < MEL_TOL, "mel(1000) = {}", hz_to_mel(1000.0));

    let mut rng = TestRng::new(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let v: Vec<f64> = (0..1 + rng.below(128)).map(|_| rng.range(-100.0, 100.0)).collect();
        for (a, b) in v.iter().zip(idct_ii(&dct_ii(&v))) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= DCT_TOL, "DCT round-trip error {worst:e}");

    let x: Vec<f64> = (0..22_050).map(|_| 0.2 * rng.normal()).collect();
    let base = ex.compute(&clip(x.clone())).map_err(|e| e.to_string())?;
    for g in [0.1, 4.0] {
        let scaled = ex.compute(&clip(x.iter().map(|v| v * g).collect())).map_err(|e| e.to_string())?;
        let shift = 20.0 * g.log10() * 128f64.sqrt();
        for f in 0..base.n_frames() {
            let d0 = scaled.coeffs.get(0, f) - base.coeffs.get(0, f);
            ensure!((d0 - shift).abs() < DSP_TOL, "gain {g}: c0 moved {d0}, expected {shift}");
            for c in 1..base.n_mfcc() {
                let d = scaled.coeffs.get(c, f) - base.coeffs.get(c, f);
                ensure!(d.abs() < DSP_TOL, "gain {g}: c{c} moved {d}");
            }
        }
    }
    Ok(format!("dct error {worst:.1e}"))
}

fn blobs(rng: &mut TestRng, per_class: usize, centers: &[(f64, f64)], spread: f64) -> (Matrix<f64>, Vec<usize>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..per_class {
            rows.push(vec![cx + spread * rng.normal(), cy + spread * rng.normal()]);
            y.push(c);
        }
    }
    (Matrix::from_rows(&rows, 2).unwrap(), y)
}

fn classifier_oracles() -> Outcome {
    let start = Instant::now();
    let ginis: Vec<f64> = [&[4usize, 0, 0, 0][..], &[2, 2], &[1, 1, 1, 1]].iter().map(|c| gini(c).unwrap()).collect();
    ensure!(ginis == [0.0, 0.5, 0.75], "gini values {ginis:?}");

    let xs = [0.0, 1.0, 2.0, 3.0];
    let y = [0, 0, 1, 1];
    let (t, _) = common::best_midpoint_split(&xs, &y, 2).ok_or("oracle found no split")?;
    let tree = train_decision_tree(&Matrix::from_vec(4, 1, xs.to_vec()).unwrap(), &y, 2, &TreeParams::default())
        .map_err(|e| e.to_string())?;
    match &tree.root {
        TreeNode::Split { threshold, left, right, .. } => {
            ensure!(*threshold == t, "tree threshold {threshold}, oracle {t}");
            ensure!(matches!(**left, TreeNode::Leaf { .. }) && matches!(**right, TreeNode::Leaf { .. }), "more than one split");
        }
        _ => return Err("tree did not split".into()),
    }

    let mut rng = TestRng::new(17);
    let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]).collect();
    let labels: Vec<usize> = (0..100).map(|_| rng.below(3)).collect();
    let x = Matrix::from_rows(&rows, 2).unwrap();
    for k in [1, 3, 5] {
        let m = train_knn(&x, &labels, 3, k).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let q = [rng.range(-1.2, 1.2), rng.range(-1.2, 1.2)];
            let (a, b) = (m.predict_row(&q), common::brute_knn(&rows, &labels, &q, k, 3));
            ensure!(a == b, "k={k} query {q:?}: {a} vs oracle {b}");
        }
    }

    let (gx, gy) = blobs(&mut rng, 30, &[(0.0, 0.0), (1.5, 0.0), (0.7, 1.3)], 0.6);
    let gbt = train_gbt(&gx, &gy, 3, &GbtParams { rounds: 100, ..Default::default() }).map_err(|e| e.to_string())?;
    let losses: Vec<f64> = (0..=100).map(|r| gbt.loss_upto(&gx, &gy, r)).collect();
    ensure!(losses.windows(2).all(|w| w[1] <= w[0]), "training loss increased");

    let (sx, sy) = blobs(&mut rng, 20, &[(-2.0, -2.0), (2.0, 2.0)], 0.5);
    let params = SvmParams::default();
    let svm = train_svm_rbf(&sx, &sy, 2, &params).map_err(|e| e.to_string())?;
    for mach in &svm.machines {
        ensure!(mach.alphas.iter().all(|&a| (0.0..=params.c).contains(&a)), "dual coefficient outside [0, C]");
        let balance: f64 = mach.alphas.iter().zip(&mach.signs).map(|(a, s)| a * s).sum();
        ensure!(balance.abs() < SVM_BALANCE_TOL, "sum alpha*y = {balance}");
    }
    ensure!(svm.predict(&sx).map_err(|e| e.to_string())? == sy, "two-blob training accuracy below 1");
    ensure!(start.elapsed() < CLASSIFIER_BUDGET, "took {:?}", start.elapsed());
    Ok(String::new())
}

/// Clip id encoded in an instance id such as `Cicada_clip3_0002__pitch0.9`.
fn source_clip(instance_id: &str) -> Option<u32> {
    let rest = &instance_id[instance_id.find("_clip")? + 5..];
    rest.split('_').next()?.parse().ok()
}

fn protocol_fidelity() -> Outcome {
    let held: Vec<u32> = build_locv_plan(&[1, 2, 3, 4, 5]).unwrap().conditions.iter().map(|c| c.test_clip).collect();
    ensure!(held == [5, 1, 2, 3, 4], "held-out order {held:?}");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec { clips_per_class: 5, clip_duration: 2.0, seed: 42, ..Default::default() };
    let raw = dataset::synth_generate(&spec, dir.path()).map_err(|e| e.to_string())?;
    let seg = dataset::segment_manifest(&raw, dir.path(), dir.path(), 1.0, SR).map_err(|e| e.to_string())?;
    let aug = augment_dataset(&seg, dir.path(), &AugmentSpec::default()).map_err(|e| e.to_string())?;
    let instances = dataset::load_instances::<f64>(&aug, dir.path()).map_err(|e| e.to_string())?;
    let fm = build_feature_matrix(&instances, &MfccConfig::default().with_n_mfcc(13)).map_err(|e| e.to_string())?;
    let n_aug = fm.augmented.iter().filter(|&&a| a).count();
    ensure!(n_aug > 0, "manifest has no augmented instances");
    let plan = locv_plan_for_manifest(&aug).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for cond in &plan.conditions {
        for pool in [TrainPool::Original, TrainPool::Augmented, TrainPool::Both] {
            let (tr, te) = condition_rows(&fm, cond, pool);
            ensure!(!tr.is_empty() && !te.is_empty(), "empty fold in condition {}", cond.condition_id);
            for &i in &tr {
                let src = source_clip(&fm.instance_ids[i]).ok_or("unparseable instance id")?;
                ensure!(
                    src != cond.test_clip && fm.groups[i] != cond.test_clip,
                    "condition {}: {} trained on",
                    cond.condition_id,
                    fm.instance_ids[i]
                );
                checked += 1;
            }
            ensure!(te.iter().all(|&i| fm.groups[i] == cond.test_clip), "test row from another clip");
        }
    }
    Ok(format!("{checked} training rows checked, {n_aug} augmented"))
}

fn metric_identities() -> Outcome {
    let enc = encode_labels(&["A", "B"]).unwrap();
    let r = evaluate(&[0, 1, 1, 1], &[0, 0, 1, 1], &enc).map_err(|e| e.to_string())?;
    ensure!(r.confusion == [[1, 1], [0, 2]], "confusion {:?}", r.confusion);
    ensure!(r.accuracy == 0.75, "accuracy {}", r.accuracy);
    let (a, b) = (&r.per_class[0], &r.per_class[1]);
    ensure!(a.precision == 1.0 && a.recall == 0.5, "A precision/recall {} {}", a.precision, a.recall);
    ensure!((a.f1 - 2.0 / 3.0).abs() <= RATIO_TOL, "F1(A) {}", a.f1);
    ensure!((b.precision - 2.0 / 3.0).abs() <= RATIO_TOL && b.recall == 1.0, "B precision/recall");
    ensure!((b.f1 - 0.8).abs() <= RATIO_TOL, "F1(B) {}", b.f1);

    let enc = encode_labels(&["a", "b", "c", "d"]).unwrap();
    let mut rng = TestRng::new(77);
    for _ in 0..50 {
        let n = 1 + rng.below(300);
        let t: Vec<usize> = (0..n).map(|_| rng.below(4)).collect();
        let p: Vec<usize> = t.iter().map(|&c| if rng.uniform() < 0.6 { c } else { rng.below(4) }).collect();
        let r = evaluate(&p, &t, &enc).map_err(|e| e.to_string())?;
        let trace: usize = (0..4).map(|c| r.confusion[c][c]).sum();
        ensure!((r.accuracy - trace as f64 / r.total as f64).abs() <= RATIO_TOL, "accuracy != trace/total");
        ensure!((r.weighted_avg.recall - r.accuracy).abs() <= RATIO_TOL, "weighted recall {} vs {}", r.weighted_avg.recall, r.accuracy);
    }
    Ok(String::new())
}

fn importance_contract() -> Outcome {
    let mut rng = TestRng::new(4);
    let d = 50;
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let y: Vec<usize> = rows.iter().map(|r| usize::from(r[3] - 0.5 * r[11] > 0.0)).collect();
    let params = ForestParams { n_estimators: 50, ..Default::default() };
    let forest = train_random_forest(&Matrix::from_rows(&rows, d).unwrap(), &y, 2, &params).map_err(|e| e.to_string())?;
    let rep = feature_importance(&forest).map_err(|e| e.to_string())?;
    let sum: f64 = rep.importances.iter().sum();
    ensure!((sum - 1.0).abs() < IMPORTANCE_SUM_TOL, "importances sum to {sum}");
    let ks: Vec<usize> = rep.cumulative.iter().map(|c| c.0).collect();
    ensure!(ks == [10, 20, 30, 40], "cutoffs {ks:?}");
    ensure!(rep.cumulative.windows(2).all(|w| w[0].1 <= w[1].1), "cumulative top-k decreases");

    let rows: Vec<Vec<f64>> = (0..120).map(|i| vec![rng.normal() + 4.0 * (i % 2) as f64, 0.5, 0.5, -1.0]).collect();
    let y: Vec<usize> = (0..120).map(|i| i % 2).collect();
    let forest = train_random_forest(&Matrix::from_rows(&rows, 4).unwrap(), &y, 2, &params).map_err(|e| e.to_string())?;
    let only = feature_importance(&forest).map_err(|e| e.to_string())?;
    ensure!(only.importances[0] == 1.0, "importance of the signal feature {}", only.importances[0]);
    Ok(format!("top-40 share {:.4}", rep.cumulative[3].1))
}

fn chitin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_chitin")).args(args).output().map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "chitin {} exited with {}: {}",
        args.join(" "),
        out.status,
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(())
}

/// synth -> segment -> cv with every family at 40 coefficients, under `root`.
fn desk_pipeline(root: &Path) -> Result<(PathBuf, Duration), String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (raw, seg, cv) = (root.join("raw"), root.join("seg"), root.join("cv"));
    let start = Instant::now();
    chitin(&["synth", "--seed", "42", "--clips", "5", "--duration", "5", "--out", &s(&raw)])?;
    chitin(&["segment", "--manifest", &s(&raw.join("manifest.json")), "--out", &s(&seg)])?;
    chitin(&[
        "cv",
        "--manifest",
        &s(&seg.join("manifest.json")),
        "--models",
        "all",
        "--n-mfcc",
        "40",
        "--seed",
        "42",
        "--out",
        &s(&cv),
    ])?;
    Ok((cv, start.elapsed()))
}

fn read_averages(csv: &str) -> Result<Vec<(String, f64)>, String> {
    let mut lines = csv.lines().skip_while(|l| *l != "model,average").skip(1);
    let mut out = Vec::new();
    for l in lines.by_ref() {
        let (m, a) = l.split_once(',').ok_or_else(|| format!("bad average row '{l}'"))?;
        out.push((m.to_string(), a.parse().map_err(|_| format!("model {m} has no average: '{a}'"))?));
    }
    Ok(out)
}

/// Per-condition KNN accuracy recomputed with exhaustive neighbour search.
fn knn_oracle_accuracies(seg_manifest: &Path) -> Result<Vec<f64>, String> {
    let root = seg_manifest.parent().unwrap();
    let m = dataset::load_manifest(seg_manifest).map_err(|e| e.to_string())?;
    let sampled = dataset::sample_instances(&m, 30, 42).map_err(|e| e.to_string())?.manifest;
    let inst = dataset::load_instances::<f64>(&sampled, root).map_err(|e| e.to_string())?;
    let fm = build_feature_matrix(&inst, &MfccConfig::default().with_n_mfcc(40)).map_err(|e| e.to_string())?;
    let enc = encode_labels(&fm.labels).map_err(|e| e.to_string())?;
    let y = enc.encode_all(&fm.labels).map_err(|e| e.to_string())?;
    let plan = locv_plan_for_manifest(&m).map_err(|e| e.to_string())?;
    let mut accs = Vec::new();
    for cond in &plan.conditions {
        let (tr, te) = condition_rows(&fm, cond, TrainPool::Both);
        let std = Standardizer::fit(&fm.data.select_rows(&tr)).map_err(|e| e.to_string())?;
        let z = std.apply(&fm.data).map_err(|e| e.to_string())?;
        let train_rows: Vec<Vec<f64>> = tr.iter().map(|&i| z.row(i).to_vec()).collect();
        let train_y: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
        let hits = te.iter().filter(|&&i| common::brute_knn(&train_rows, &train_y, z.row(i), 5, enc.len()) == y[i]).count();
        accs.push(hits as f64 / te.len() as f64);
    }
    Ok(accs)
}

fn desk_scale() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (cv, elapsed) = desk_pipeline(dir.path())?;
    let csv = fs::read_to_string(cv.join("comparison_mfcc40.csv")).map_err(|e| e.to_string())?;
    let averages = read_averages(&csv)?;
    ensure!(averages.len() == 5, "{} model averages", averages.len());
    for (m, a) in &averages {
        ensure!(*a >= MIN_AVERAGE, "{m} average {a:.3} < {MIN_AVERAGE}");
    }
    let knn = averages.iter().find(|(m, _)| m == "knn").ok_or("no knn row")?.1;
    ensure!(knn >= MIN_KNN_AVERAGE, "knn average {knn:.3} < {MIN_KNN_AVERAGE}");

    let reported: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("knn,") && l.matches(',').count() == 3)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let oracle = knn_oracle_accuracies(&dir.path().join("seg/manifest.json"))?;
    ensure!(reported == oracle, "knn per-condition {reported:?}, oracle {oracle:?}");
    ensure!(elapsed < CV_BUDGET, "pipeline took {elapsed:?}");
    let summary: Vec<String> = averages.iter().map(|(m, a)| format!("{m}={a:.3}")).collect();
    Ok(format!("{} in {:.1}s", summary.join(" "), elapsed.as_secs_f64()))
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let (cv_a, _) = desk_pipeline(a.path())?;
    let (cv_b, _) = desk_pipeline(b.path())?;
    for name in ["comparison_mfcc40.csv", "boxplot.csv", "bar.csv"] {
        let (x, y) = (fs::read(cv_a.join(name)).map_err(|e| e.to_string())?, fs::read(cv_b.join(name)).map_err(|e| e.to_string())?);
        ensure!(x == y, "{name} differs between runs");
    }

    let mut rng = TestRng::new(99);
    let (x, y) = blobs(&mut rng, 25, &[(0.0, 0.0), (2.0, 0.5), (1.0, 2.0), (-1.0, 1.5)], 0.8);
    let enc = encode_labels(&["Barkbeetle", "Cicada", "Cricket", "Termite"]).unwrap();
    let probes: Vec<Vec<f64>> = (0..ROUND_TRIP_PROBES).map(|_| vec![rng.range(-3.0, 4.0), rng.range(-3.0, 4.0)]).collect();
    let probes = Matrix::from_rows(&probes, 2).unwrap();
    for family in Family::ALL {
        let std = Standardizer::fit(&x).map_err(|e| e.to_string())?;
        let model = train(family, &std.apply(&x).unwrap(), &y, 4, &ModelParams::default()).map_err(|e| e.to_string())?;
        let art = ModelArtifact { model, label_encoding: enc.clone(), standardizer: Some(std), mfcc_config: None, provenance: None };
        let path = a.path().join(format!("{family}.json"));
        save_model(&art, &path).map_err(|e| e.to_string())?;
        let back = load_model::<f64>(&path).map_err(|e| e.to_string())?;
        ensure!(back == art, "{family} artifact changed on reload");
        ensure!(
            back.predict_matrix(&probes).map_err(|e| e.to_string())? == art.predict_matrix(&probes).map_err(|e| e.to_string())?,
            "{family} predictions changed on reload"
        );
    }
    Ok(String::new())
}

fn augmentation_laws() -> Outcome {
    let mut worst_len = 0.0f64;
    for f in [440.0, 1000.0] {
        let input = clip(common::sine(f, SR, 44_100, 0.8));
        for factor in [0.9, 1.1, 2.0] {
            for (kind, out) in [("speed", speed_change(&input, factor)), ("pitch", pitch_shift(&input, factor))] {
                let out = out.map_err(|e| e.to_string())?;
                let dlen = (out.len() as f64 - 44_100.0 / factor).abs();
                worst_len = worst_len.max(dlen);
                ensure!(dlen <= 1.0, "{kind} x{factor} on {f} Hz: {} samples", out.len());
                ensure!(out.sample_rate == SR, "{kind} changed the sample rate");
                let (peak, bin) = common::dominant_frequency(&out.samples[..4096], SR);
                ensure!((peak - f * factor).abs() <= bin, "{kind} x{factor} on {f} Hz: peak {peak:.1} Hz");
            }
        }
    }
    Ok(format!("max length error {worst_len:.2} samples"))
}
