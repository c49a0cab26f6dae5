use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use chitin::audio_io;
use chitin::augment::{self, AugmentSpec};
use chitin::dataset::{self, DatasetManifest, SynthSpec};
use chitin::evaluation::{self, ComparisonTable};
use chitin::features::{self, FeatureMatrix, MfccConfig, StatSet, Standardizer};
use chitin::models::{self, Family, Model, ModelArtifact, ModelParams};
use serde_json::json;

use crate::output::{write_atomic, write_json, Provenance, RunConfig};
use crate::plots::{self, SweepResult};
use crate::{Cli, Command, FeatureArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    ensure!(g.sample_rate > 0.0, "--sample-rate must be positive");
    ensure!(g.window > 0.0, "--window must be positive");
    match &cli.command {
        Command::Synth { clips, duration } => synth(cli, *clips, *duration),
        Command::Segment { manifest } => segment(cli, manifest),
        Command::Extract { manifest, features } => extract(cli, manifest, features),
        Command::Augment { manifest, speed, pitch } => augment(cli, manifest, speed, pitch),
        Command::Train { features, model, split, n_mfcc } => train(cli, features, *model, split.0, *n_mfcc),
        Command::Evaluate { model, features } => evaluate(cli, model, features),
        Command::Cv { manifest, features, models, mfcc_sweep, feature_args, train_pool, svg } => cv(
            cli,
            CvInput { manifest: manifest.as_deref(), features: features.as_deref() },
            &models.0,
            mfcc_sweep,
            feature_args,
            *train_pool,
            *svg,
        ),
        Command::Importance { model } => importance(cli, model),
        Command::Embed { features, raw } => embed(cli, features, *raw),
    }
}

fn config(cli: &Cli, command: &str) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        argv: std::env::args().skip(1).collect(),
        sample_rate: cli.global.sample_rate,
        window_seconds: cli.global.window,
        n_mfcc: 40,
        stats: StatSet::Mean.label().to_string(),
        per_class: 30,
        base_seed: cli.global.seed,
        models: Vec::new(),
        out: cli.global.out.display().to_string(),
    }
}

fn with_features(mut cfg: RunConfig, f: &FeatureArgs) -> RunConfig {
    cfg.n_mfcc = f.n_mfcc;
    cfg.stats = f.stats.label().to_string();
    cfg.per_class = f.per_class;
    cfg
}

fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    write_json(path, manifest)
}

fn load_manifest(path: &Path) -> Result<(DatasetManifest, PathBuf)> {
    let m = dataset::load_manifest(path).with_context(|| format!("cannot load manifest {}", path.display()))?;
    Ok((m, dataset::manifest_root(path)))
}

fn same_dir(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Makes every relative path absolute against `root` so the manifest can live elsewhere.
fn absolutize(manifest: &mut DatasetManifest, root: &Path) -> Result<()> {
    let root = fs::canonicalize(root).with_context(|| format!("cannot resolve {}", root.display()))?;
    let fix = |p: &mut String| {
        if Path::new(p.as_str()).is_relative() {
            *p = root.join(&*p).display().to_string();
        }
    };
    for class in &mut manifest.classes {
        for clip in &mut class.clips {
            fix(&mut clip.path);
            clip.instances.iter_mut().for_each(|i| fix(&mut i.path));
        }
    }
    Ok(())
}

fn synth(cli: &Cli, clips: u32, duration: f64) -> Result<()> {
    let g = &cli.global;
    let spec = SynthSpec {
        clips_per_class: clips,
        clip_duration: duration,
        seed: g.seed,
        sample_rate: g.sample_rate,
        window_seconds: g.window,
    };
    let manifest = dataset::synth_generate(&spec, &g.out).with_context(|| format!("cannot write corpus to {}", g.out.display()))?;
    let path = g.out.join("manifest.json");
    save_manifest(&manifest, &path)?;
    Provenance::new(config(cli, "synth"), &[])?.write(&g.out, json!({ "synth": spec }))?;
    println!("{}", path.display());
    Ok(())
}

fn segment(cli: &Cli, manifest_path: &Path) -> Result<()> {
    let g = &cli.global;
    let (manifest, root) = load_manifest(manifest_path)?;
    fs::create_dir_all(&g.out).with_context(|| format!("cannot create {}", g.out.display()))?;
    let out = dataset::segment_manifest(&manifest, &root, &g.out, g.window, g.sample_rate)?;
    let path = g.out.join("manifest.json");
    save_manifest(&out, &path)?;
    Provenance::new(config(cli, "segment"), &[manifest_path])?
        .write(&g.out, json!({ "instances": out.instance_count() }))?;
    println!("{} ({} instances)", path.display(), out.instance_count());
    Ok(())
}

fn augment(cli: &Cli, manifest_path: &Path, speed: &[f64], pitch: &[f64]) -> Result<()> {
    let g = &cli.global;
    let (manifest, root) = load_manifest(manifest_path)?;
    let spec = AugmentSpec { speed_factors: speed.to_vec(), pitch_factors: pitch.to_vec(), seed: g.seed };
    let mut out = augment::augment_dataset(&manifest, &root, &spec)?;
    fs::create_dir_all(&g.out).with_context(|| format!("cannot create {}", g.out.display()))?;
    if !same_dir(&root, &g.out) {
        absolutize(&mut out, &root)?;
    }
    let path = g.out.join("manifest.json");
    save_manifest(&out, &path)?;
    let added = out.iter_instances().filter(|(_, _, i)| i.augmented).count();
    Provenance::new(config(cli, "augment"), &[manifest_path])?
        .write(&g.out, json!({ "augment": spec, "augmented_instances": added }))?;
    println!("{} ({added} augmented instances)", path.display());
    Ok(())
}

/// Loads (optionally sampled) instances at the working rate and extracts features.
fn features_from_manifest(cli: &Cli, manifest_path: &Path, cfg: &MfccConfig, per_class: usize) -> Result<FeatureMatrix<f64>> {
    let (manifest, root) = load_manifest(manifest_path)?;
    let manifest = if per_class > 0 {
        let s = dataset::sample_instances(&manifest, per_class, cli.global.seed)?;
        s.warnings.iter().for_each(|w| log::warn!("{w}"));
        s.manifest
    } else {
        manifest
    };
    let mut instances = dataset::load_instances::<f64>(&manifest, &root)?;
    for inst in &mut instances {
        inst.audio = audio_io::resample(&inst.audio, cli.global.sample_rate);
    }
    Ok(features::build_feature_matrix(&instances, cfg)?)
}

fn read_features(path: &Path) -> Result<FeatureMatrix<f64>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    FeatureMatrix::read_csv(BufReader::new(f)).with_context(|| format!("cannot parse {}", path.display()))
}

fn write_features(fm: &FeatureMatrix<f64>, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    fm.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

/// Recovers the MFCC settings implied by a feature CSV's columns.
fn mfcc_config_from_columns(columns: &[String]) -> Result<MfccConfig> {
    let means = columns.iter().filter(|c| c.starts_with("mfcc_mean_")).count();
    let stds = columns.iter().filter(|c| c.starts_with("mfcc_std_")).count();
    ensure!(means > 0 && means + stds == columns.len(), "feature columns are not MFCC summaries");
    let stats = match stds {
        0 => StatSet::Mean,
        s if s == means => StatSet::MeanStd,
        _ => bail!("mean and std column counts differ ({means} vs {stds})"),
    };
    let cfg = MfccConfig::default().with_n_mfcc(means).with_stats(stats);
    ensure!(cfg.column_names() == columns, "feature columns are out of order");
    Ok(cfg)
}

fn extract(cli: &Cli, manifest_path: &Path, f: &FeatureArgs) -> Result<()> {
    let g = &cli.global;
    let cfg = MfccConfig::default().with_n_mfcc(f.n_mfcc).with_stats(f.stats);
    cfg.validate(g.sample_rate)?;
    let fm = features_from_manifest(cli, manifest_path, &cfg, f.per_class)?;
    let path = g.out.join("features.csv");
    write_features(&fm, &path)?;
    Provenance::new(with_features(config(cli, "extract"), f), &[manifest_path])?
        .write(&g.out, json!({ "mfcc": cfg, "rows": fm.n_rows() }))?;
    println!("{} ({} rows x {} columns)", path.display(), fm.n_rows(), 3 + fm.width());
    Ok(())
}

fn train(cli: &Cli, features_path: &Path, family: Family, split: Option<f64>, n_mfcc: Option<usize>) -> Result<()> {
    let g = &cli.global;
    let mut fm = read_features(features_path)?;
    let mut mfcc = mfcc_config_from_columns(&fm.columns)?;
    if let Some(n) = n_mfcc {
        ensure!(n >= 1 && n <= mfcc.n_mfcc, "--n-mfcc {n} outside 1..={}", mfcc.n_mfcc);
        fm = fm.prefix_coefficients(n, mfcc.stats);
        mfcc = mfcc.with_n_mfcc(n);
    }
    let encoding = models::encode_labels(&fm.labels)?;
    let params = ModelParams::default().with_seed(g.seed);
    let mut rc = config(cli, "train");
    rc.n_mfcc = mfcc.n_mfcc;
    rc.stats = mfcc.stats.label().to_string();
    rc.per_class = 0;
    rc.models = vec![family.to_string()];
    let prov = Provenance::new(rc, &[features_path])?;

    let (mut artifact, report, plan) = match split {
        Some(frac) => {
            let s = evaluation::random_split(fm.n_rows(), frac, g.seed)?;
            let (a, r) = evaluation::fit_and_evaluate(&fm, &encoding, &s.train, &s.test, family, &params)?;
            (a, Some(r), Some(s))
        }
        None => {
            let all: Vec<usize> = (0..fm.n_rows()).collect();
            let std = Standardizer::fit(&fm.data)?;
            let y = encoding.encode_all(&fm.labels)?;
            let model = models::train(family, &std.apply(&fm.data)?, &y, encoding.len(), &params)?;
            let a = ModelArtifact {
                model,
                label_encoding: encoding.clone(),
                standardizer: Some(std),
                mfcc_config: None,
                provenance: None,
            };
            log::info!("trained on all {} rows", all.len());
            (a, None, None)
        }
    };
    artifact.mfcc_config = Some(mfcc);
    artifact.provenance = Some(prov.to_value());
    let model_path = g.out.join("model.json");
    write_atomic(&model_path, artifact.to_json().as_bytes())?;
    if let (Some(r), Some(s)) = (&report, &plan) {
        let text = format!("{}\n{}", random_split_label(s), r.to_text());
        write_atomic(&g.out.join("train_report.txt"), text.as_bytes())?;
        let mut doc = prov.to_value();
        doc["protocol"] = json!("random_split");
        doc["split"] = json!(s);
        doc["report"] = json!(r);
        write_json(&g.out.join("train_report.json"), &doc)?;
        print!("{text}");
    }
    prov.write(&g.out, json!({ "model": model_path.display().to_string() }))?;
    println!("{}", model_path.display());
    Ok(())
}

fn evaluate(cli: &Cli, model_path: &Path, features_path: &Path) -> Result<()> {
    let g = &cli.global;
    let artifact = models::load_model::<f64>(model_path)?;
    let mut fm = read_features(features_path)?;
    if let Some(cfg) = &artifact.mfcc_config {
        let have = mfcc_config_from_columns(&fm.columns)?;
        ensure!(have.stats == cfg.stats, "model expects '{}' statistics, CSV has '{}'", cfg.stats.label(), have.stats.label());
        ensure!(have.n_mfcc >= cfg.n_mfcc, "model needs {} coefficients, CSV has {}", cfg.n_mfcc, have.n_mfcc);
        fm = fm.prefix_coefficients(cfg.n_mfcc, cfg.stats);
    }
    let truths = artifact.label_encoding.encode_all(&fm.labels)?;
    let pred = artifact.predict_matrix(&fm.data)?;
    let report = evaluation::evaluate(&pred, &truths, &artifact.label_encoding)?;
    let mut rc = config(cli, "evaluate");
    rc.models = vec![artifact.family().to_string()];
    let prov = Provenance::new(rc, &[model_path, features_path])?;
    let mut doc = prov.to_value();
    doc["report"] = json!(report);
    write_json(&g.out.join("evaluation.json"), &doc)?;
    write_atomic(&g.out.join("evaluation.txt"), report.to_text().as_bytes())?;
    print!("{}", report.to_text());
    Ok(())
}

pub struct CvInput<'a> {
    manifest: Option<&'a Path>,
    features: Option<&'a Path>,
}

fn cv(
    cli: &Cli,
    input: CvInput<'_>,
    families: &[Family],
    sweep: &[usize],
    f: &FeatureArgs,
    pool: evaluation::TrainPool,
    svg: bool,
) -> Result<()> {
    let g = &cli.global;
    let mut counts: Vec<usize> = if sweep.is_empty() { vec![f.n_mfcc] } else { sweep.to_vec() };
    counts.dedup();
    ensure!(counts.iter().all(|&n| n >= 1), "coefficient counts must be >= 1");
    let max_n = *counts.iter().max().expect("non-empty");
    let (fm, plan, input_path) = match (input.manifest, input.features) {
        (Some(m), _) => {
            let cfg = MfccConfig::default().with_n_mfcc(max_n).with_stats(f.stats);
            cfg.validate(g.sample_rate)?;
            let fm = features_from_manifest(cli, m, &cfg, f.per_class)?;
            let (manifest, _) = load_manifest(m)?;
            (fm, evaluation::locv_plan_for_manifest(&manifest)?, m)
        }
        (None, Some(p)) => {
            let fm = read_features(p)?;
            let have = mfcc_config_from_columns(&fm.columns)?;
            ensure!(have.stats == f.stats, "CSV has '{}' statistics, --stats asks for '{}'", have.stats.label(), f.stats.label());
            ensure!(max_n <= have.n_mfcc, "CSV has {} coefficients, sweep needs {max_n}", have.n_mfcc);
            let mut clips: Vec<u32> = fm.groups.clone();
            clips.sort_unstable();
            clips.dedup();
            (fm, evaluation::build_locv_plan(&clips)?, p)
        }
        (None, None) => bail!("cv needs --manifest or --features"),
    };
    let params = ModelParams::default().with_seed(g.seed);
    let mut results = Vec::new();
    for &n in &counts {
        let sub = fm.prefix_coefficients(n, f.stats);
        let table = evaluation::run_comparison(&sub, families, &plan, &params, pool)?;
        write_atomic(&g.out.join(format!("comparison_mfcc{n}.csv")), &table_csv(&table)?)?;
        let doc = json!({ "protocol": "leave_one_clip_out", "train_pool": pool, "n_mfcc": n, "table": table });
        write_json(&g.out.join(format!("reports_mfcc{n}.json")), &doc)?;
        write_atomic(&g.out.join(format!("reports_mfcc{n}.txt")), reports_text(&table, pool).as_bytes())?;
        results.push(SweepResult { n_mfcc: n, table });
    }
    write_atomic(&g.out.join("boxplot.csv"), plots::boxplot_csv(&results).as_bytes())?;
    write_atomic(&g.out.join("bar.csv"), plots::bar_csv(&results).as_bytes())?;
    if svg {
        write_atomic(&g.out.join("boxplot.svg"), plots::boxplot_svg(&results).as_bytes())?;
        write_atomic(&g.out.join("bar.svg"), plots::bar_svg(&results).as_bytes())?;
    }
    let mut rc = with_features(config(cli, "cv"), f);
    rc.n_mfcc = max_n;
    rc.models = families.iter().map(|f| f.to_string()).collect();
    let failures: usize = results.iter().map(|r| r.table.failures().count()).sum();
    Provenance::new(rc, &[input_path])?.write(
        &g.out,
        json!({ "mfcc_counts": counts, "train_pool": pool, "plan": plan, "failed_cells": failures }),
    )?;
    for r in &results {
        println!("n_mfcc={}", r.n_mfcc);
        for (fam, avg) in r.table.averages() {
            match avg {
                Some(a) => println!("  {fam:<14} {a:.4}"),
                None => println!("  {fam:<14} failed"),
            }
        }
    }
    if failures > 0 {
        eprintln!("warning: {failures} cell(s) failed; see the comparison CSVs");
    }
    Ok(())
}

fn table_csv(table: &ComparisonTable) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    Ok(buf)
}

/// Report header for the random protocol. Instances cut from one clip can
/// land on both sides, so its scores are not clip-independent.
fn random_split_label(s: &evaluation::RandomSplit) -> String {
    format!(
        "protocol: random split, {} train / {} test rows, seed {} (not grouped by clip)\n",
        s.train.len(),
        s.test.len(),
        s.seed
    )
}

fn reports_text(table: &ComparisonTable, pool: evaluation::TrainPool) -> String {
    let mut s = format!("protocol: leave-one-clip-out, train pool {pool}\n\n");
    for fam in &table.families {
        for c in table.cells.iter().filter(|c| c.family == *fam) {
            let _ = writeln!(s, "== {fam} / condition {} (test clip {}) ==", c.condition_id, c.test_clip);
            match (&c.report, &c.error) {
                (Some(r), _) => s.push_str(&r.to_text()),
                (None, Some(e)) => {
                    let _ = writeln!(s, "failed: {e}");
                }
                (None, None) => s.push_str("failed\n"),
            }
            s.push('\n');
        }
    }
    s
}

fn importance(cli: &Cli, model_path: &Path) -> Result<()> {
    let g = &cli.global;
    let artifact = models::load_model::<f64>(model_path)?;
    let Model::RandomForest(forest) = &artifact.model else {
        return Err(anyhow!("importance needs a random_forest model, got {}", artifact.family()));
    };
    let report = evaluation::feature_importance(forest)?;
    let names: Vec<String> = match &artifact.mfcc_config {
        Some(cfg) if cfg.feature_width() == forest.n_features => cfg.column_names(),
        _ => (0..forest.n_features).map(|i| format!("f{i}")).collect(),
    };
    let mut csv = String::from("rank,feature_index,feature,importance\n");
    for (rank, &j) in report.order.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", rank + 1, j, names[j], report.importances[j]);
    }
    write_atomic(&g.out.join("importance.csv"), csv.as_bytes())?;
    let mut topk = String::from("k,cumulative_importance\n");
    for (k, v) in &report.cumulative {
        let _ = writeln!(topk, "{k},{v}");
    }
    write_atomic(&g.out.join("importance_topk.csv"), topk.as_bytes())?;
    let mut rc = config(cli, "importance");
    rc.models = vec![artifact.family().to_string()];
    let prov = Provenance::new(rc, &[model_path])?;
    let mut doc = prov.to_value();
    doc["importance"] = json!(report);
    doc["feature_names"] = json!(names);
    write_json(&g.out.join("importance.json"), &doc)?;
    for (k, v) in &report.cumulative {
        println!("top {k:>2}: {v:.4}");
    }
    Ok(())
}

fn embed(cli: &Cli, features_path: &Path, raw: bool) -> Result<()> {
    let g = &cli.global;
    let fm = read_features(features_path)?;
    let x = if raw { fm.data.clone() } else { Standardizer::fit(&fm.data)?.apply(&fm.data)? };
    let pca = evaluation::pca_2d(&x)?;
    let mut csv = String::from("instance_id,clip_id,label,x,y\n");
    for i in 0..fm.n_rows() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fm.instance_ids[i],
            fm.groups[i],
            fm.labels[i],
            pca.coords.get(i, 0),
            pca.coords.get(i, 1)
        );
    }
    let path = g.out.join("embedding_pca2.csv");
    write_atomic(&path, csv.as_bytes())?;
    Provenance::new(config(cli, "embed"), &[features_path])?.write(
        &g.out,
        json!({
            "method": "pca2",
            "standardized": !raw,
            "explained_variance": pca.explained_variance,
            "total_variance": pca.total_variance,
        }),
    )?;
    println!("{}", path.display());
    Ok(())
}
