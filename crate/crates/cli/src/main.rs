//! `chitin`: file-based pipeline over the chitin library.
//!
//! Exit codes: 0 on success (including recorded per-cell failures in `cv`),
//! 1 on runtime failures, 2 on usage errors.

mod commands;
mod output;
mod plots;

use std::path::PathBuf;
use std::process::ExitCode;

use chitin::evaluation::TrainPool;
use chitin::features::StatSet;
use chitin::models::Family;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "chitin", version, about = "Insect audio classification pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Base seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Working sample rate in Hz.
    #[arg(long, global = true, default_value_t = 44_100.0)]
    pub sample_rate: f64,
    /// Instance window length in seconds.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub window: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Number of cepstral coefficients.
    #[arg(long = "n-mfcc", alias = "mfcc", default_value_t = 40)]
    pub n_mfcc: usize,
    /// Per-coefficient statistics: `mean` or `mean,std`.
    #[arg(long, default_value = "mean")]
    pub stats: StatSet,
    /// Original instances sampled per class (0 = all).
    #[arg(long, default_value_t = 30)]
    pub per_class: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic four-class corpus.
    Synth {
        #[arg(long, default_value_t = 5)]
        clips: u32,
        /// Clip duration in seconds.
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
    },
    /// Cut every clip of a manifest into fixed windows.
    Segment {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute the MFCC feature CSV.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        features: FeatureArgs,
    },
    /// Add speed and pitch variants of every original instance.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 1.1])]
        speed: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.9, 1.1])]
        pitch: Vec<f64>,
    },
    /// Train one model on a seeded random split.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "random_forest")]
        model: Family,
        /// `TRAIN-TEST` percentages such as `80-20`, or `none` to train on every row.
        #[arg(long, default_value = "80-20", value_parser = parse_split)]
        split: Split,
        /// Keep only the first N coefficients of the CSV.
        #[arg(long = "n-mfcc")]
        n_mfcc: Option<usize>,
    },
    /// Score a saved model on a feature CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Leave-one-clip-out comparison of model families.
    Cv {
        /// Manifest to extract features from.
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        manifest: Option<PathBuf>,
        /// Pre-extracted feature CSV.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Comma-separated families, or `all`.
        #[arg(long, default_value = "all", value_parser = parse_models)]
        models: Families,
        /// Coefficient counts to sweep; overrides --n-mfcc.
        #[arg(long, value_delimiter = ',')]
        mfcc_sweep: Vec<usize>,
        #[command(flatten)]
        feature_args: FeatureArgs,
        #[arg(long, default_value = "both")]
        train_pool: TrainPool,
        /// Also render SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Gini importances of a saved random forest.
    Importance {
        #[arg(long)]
        model: PathBuf,
    },
    /// Two-dimensional PCA embedding of a feature CSV.
    Embed {
        #[arg(long)]
        features: PathBuf,
        /// Skip z-scoring the columns before projecting.
        #[arg(long)]
        raw: bool,
    },
}

#[derive(Debug, Clone)]
pub struct Families(pub Vec<Family>);

/// Test fraction of a random split; `None` trains on every row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split(pub Option<f64>);

fn parse_models(s: &str) -> Result<Families, String> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Families(Family::ALL.to_vec()));
    }
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let f: Family = part.parse()?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err("no model families given".into());
    }
    Ok(Families(out))
}

/// `80-20` -> test fraction 0.2; `none` -> no split.
fn parse_split(s: &str) -> Result<Split, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(Split(None));
    }
    let (a, b) = s.split_once('-').ok_or_else(|| format!("split '{s}' is not TRAIN-TEST"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad train share in '{s}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad test share in '{s}'"))?;
    if !(a > 0.0 && b > 0.0) {
        return Err(format!("split '{s}' needs two positive shares"));
    }
    Ok(Split(Some(b / (a + b))))
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("CHITIN_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("CHITIN_THREADS must be a non-negative integer, got '{v}'"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
