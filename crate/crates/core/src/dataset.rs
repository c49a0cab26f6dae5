//! Clip/instance bookkeeping, fixed-window segmentation, seeded sampling and
//! the synthetic four-class fixture corpus.

use std::collections::{BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, AudioClip, AudioError, CANONICAL_SAMPLE_RATE};
use crate::scalar::Scalar;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest schema violation: {0}")]
    SchemaViolation(String),
    #[error("dangling instance reference: {instance_id} -> {path}")]
    DanglingInstanceReference { instance_id: String, path: String },
    #[error("class '{0}' has no instances")]
    EmptyClass(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("manifest I/O on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub instance_id: String,
    pub path: String,
    pub augmented: bool,
    pub transform: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: u32,
    pub path: String,
    pub duration_s: f64,
    pub instances: Vec<InstanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub clips: Vec<ClipEntry>,
}

/// Classes, their clips and the instances cut from each clip.
///
/// Paths are relative to the directory holding the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub window_seconds: f64,
    pub classes: Vec<ClassEntry>,
}

impl DatasetManifest {
    pub fn new(window_seconds: f64) -> Self {
        Self { schema_version: MANIFEST_SCHEMA_VERSION, window_seconds, classes: Vec::new() }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn instance_count(&self) -> usize {
        self.classes.iter().flat_map(|c| &c.clips).map(|c| c.instances.len()).sum()
    }

    pub fn clip_count(&self) -> usize {
        self.classes.iter().map(|c| c.clips.len()).sum()
    }

    /// `(class, clip_id, instance)` triples in manifest order.
    pub fn iter_instances(&self) -> impl Iterator<Item = (&str, u32, &InstanceEntry)> + '_ {
        self.classes.iter().flat_map(|c| {
            c.clips.iter().flat_map(move |clip| clip.instances.iter().map(move |i| (c.name.as_str(), clip.clip_id, i)))
        })
    }

    /// Per-clip instance counts, `counts[class][clip_index]`.
    pub fn instance_table(&self) -> Vec<(String, Vec<(u32, usize)>)> {
        self.classes
            .iter()
            .map(|c| (c.name.clone(), c.clips.iter().map(|k| (k.clip_id, k.instances.len())).collect()))
            .collect()
    }

    /// Sorted union of clip ids across classes.
    pub fn clip_ids(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.classes.iter().flat_map(|c| c.clips.iter().map(|k| k.clip_id)).collect();
        set.into_iter().collect()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::SchemaViolation(m));
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.window_seconds > 0.0) {
            return bad(format!("window_seconds must be > 0, got {}", self.window_seconds));
        }
        let mut names = HashSet::new();
        let mut ids = HashSet::new();
        for class in &self.classes {
            if class.name.is_empty() || !names.insert(class.name.as_str()) {
                return bad(format!("duplicate or empty class name '{}'", class.name));
            }
            let mut clip_ids: Vec<u32> = class.clips.iter().map(|c| c.clip_id).collect();
            clip_ids.sort_unstable();
            if clip_ids.iter().enumerate().any(|(i, &id)| id != i as u32 + 1) {
                return bad(format!("class '{}' clip ids {clip_ids:?} are not 1..={}", class.name, clip_ids.len()));
            }
            for clip in &class.clips {
                for inst in &clip.instances {
                    if !ids.insert(inst.instance_id.as_str()) {
                        return bad(format!("instance '{}' listed more than once", inst.instance_id));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    manifest.validate()?;
    let path = path.as_ref();
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(io)
}

/// Loads and validates a manifest, checking every instance file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::SchemaViolation(e.to_string()))?;
    manifest.validate()?;
    let root = manifest_root(path);
    for (_, _, inst) in manifest.iter_instances() {
        if !root.join(&inst.path).is_file() {
            return Err(DatasetError::DanglingInstanceReference {
                instance_id: inst.instance_id.clone(),
                path: inst.path.clone(),
            });
        }
    }
    Ok(manifest)
}

/// Directory that relative manifest paths resolve against.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// One fixed-length labeled segment.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord<T> {
    pub instance_id: String,
    pub class_label: String,
    pub clip_id: u32,
    pub audio: AudioClip<T>,
    pub augmented: bool,
    pub transform: Option<String>,
}

pub fn window_samples(window_seconds: f64, sample_rate: f64) -> usize {
    (window_seconds * sample_rate).round() as usize
}

pub fn instance_id(class: &str, clip_id: u32, index: usize) -> String {
    format!("{class}_clip{clip_id}_{index:03}")
}

/// Cuts consecutive non-overlapping windows from `t = 0`; the short tail is dropped.
pub fn segment_clip<T: Scalar>(
    clip: &AudioClip<T>,
    window_seconds: f64,
    class_label: &str,
    clip_id: u32,
) -> Vec<InstanceRecord<T>> {
    assert!(window_seconds > 0.0, "window must be positive");
    let win = window_samples(window_seconds, clip.sample_rate);
    if win == 0 {
        return Vec::new();
    }
    clip.samples
        .chunks_exact(win)
        .enumerate()
        .map(|(i, chunk)| InstanceRecord {
            instance_id: instance_id(class_label, clip_id, i),
            class_label: class_label.to_string(),
            clip_id,
            audio: AudioClip { samples: chunk.to_vec(), sample_rate: clip.sample_rate, source_path: clip.source_path.clone() },
            augmented: false,
            transform: None,
        })
        .collect()
}

/// Result of [`sample_instances`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub manifest: DatasetManifest,
    pub warnings: Vec<String>,
}

/// Seeded uniform sample without replacement of up to `per_class` original
/// instances per class. Augmented instances follow their selected source.
pub fn sample_instances(manifest: &DatasetManifest, per_class: usize, seed: u64) -> Result<Sampled, DatasetError> {
    if per_class == 0 {
        return Err(DatasetError::InvalidParameter("per_class must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut warnings = Vec::new();
    let mut out = manifest.clone();
    for class in &mut out.classes {
        let originals: Vec<(usize, usize)> = class
            .clips
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| c.instances.iter().enumerate().filter(|(_, i)| !i.augmented).map(move |(ii, _)| (ci, ii)))
            .collect();
        if originals.is_empty() {
            return Err(DatasetError::EmptyClass(class.name.clone()));
        }
        let chosen: HashSet<(usize, usize)> = if originals.len() <= per_class {
            if originals.len() < per_class {
                warnings.push(format!(
                    "class '{}' has {} instances, fewer than the requested {per_class}; taking all",
                    class.name,
                    originals.len()
                ));
            }
            originals.iter().copied().collect()
        } else {
            index::sample(&mut rng, originals.len(), per_class).into_iter().map(|k| originals[k]).collect()
        };
        for (ci, clip) in class.clips.iter_mut().enumerate() {
            let keep_ids: HashSet<String> = clip
                .instances
                .iter()
                .enumerate()
                .filter(|(ii, _)| chosen.contains(&(ci, *ii)))
                .map(|(_, i)| i.instance_id.clone())
                .collect();
            clip.instances.retain(|i| {
                if i.augmented {
                    i.instance_id.split("__").next().is_some_and(|src| keep_ids.contains(src))
                } else {
                    keep_ids.contains(&i.instance_id)
                }
            });
        }
    }
    Ok(Sampled { manifest: out, warnings })
}

/// Reads every instance's audio, in manifest order.
pub fn load_instances<T: Scalar>(manifest: &DatasetManifest, root: &Path) -> Result<Vec<InstanceRecord<T>>, DatasetError> {
    let entries: Vec<(&str, u32, &InstanceEntry)> = manifest.iter_instances().collect();
    entries
        .par_iter()
        .map(|(class, clip_id, inst)| {
            let audio = audio_io::load_clip::<T>(root.join(&inst.path))?;
            Ok(InstanceRecord {
                instance_id: inst.instance_id.clone(),
                class_label: class.to_string(),
                clip_id: *clip_id,
                audio,
                augmented: inst.augmented,
                transform: inst.transform.clone(),
            })
        })
        .collect()
}

/// Relative path of an instance WAV inside the per-class, per-clip tree.
pub fn instance_rel_path(class: &str, clip_id: u32, instance_id: &str) -> String {
    format!("instances/{class}/clip{clip_id}/{instance_id}.wav")
}

/// Segments every clip of `manifest` (rooted at `root`) after bringing it to
/// `sample_rate`, writes instance WAVs under `out_root` and returns the new
/// manifest, whose paths are relative to `out_root`.
pub fn segment_manifest(
    manifest: &DatasetManifest,
    root: &Path,
    out_root: &Path,
    window_seconds: f64,
    sample_rate: f64,
) -> Result<DatasetManifest, DatasetError> {
    if !(window_seconds > 0.0) {
        return Err(DatasetError::InvalidParameter(format!("window must be > 0, got {window_seconds}")));
    }
    let same_root = fs::canonicalize(root).ok() == fs::canonicalize(out_root).ok();
    let mut out = manifest.clone();
    out.window_seconds = window_seconds;
    for class in &mut out.classes {
        let name = class.name.clone();
        let results: Vec<Result<ClipEntry, DatasetError>> = class
            .clips
            .par_iter()
            .map(|clip| {
                let src = root.join(&clip.path);
                let audio = audio_io::load_clip::<f64>(&src)?;
                let audio = audio_io::resample(&audio, sample_rate);
                let mut entry = clip.clone();
                entry.duration_s = audio.duration_seconds();
                if !same_root {
                    entry.path = fs::canonicalize(&src).unwrap_or(src).display().to_string();
                }
                entry.instances = segment_clip(&audio, window_seconds, &name, clip.clip_id)
                    .into_iter()
                    .map(|rec| {
                        let rel = instance_rel_path(&name, clip.clip_id, &rec.instance_id);
                        audio_io::write_wav(&rec.audio, out_root.join(&rel))?;
                        Ok(InstanceEntry { instance_id: rec.instance_id, path: rel, augmented: false, transform: None })
                    })
                    .collect::<Result<_, DatasetError>>()?;
                Ok(entry)
            })
            .collect();
        class.clips = results.into_iter().collect::<Result<_, _>>()?;
    }
    Ok(out)
}

/// Signal families of the synthetic corpus. Band placements are fixture conventions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Archetype {
    /// Short 4-5 kHz frequency-swept chirps.
    TonalChirp,
    /// Amplitude-modulated 3-8 kHz band noise.
    BroadbandBuzz,
    /// Trains of sharp, fast-decaying broadband clicks.
    ImpulsiveClick,
    /// ~1 kHz tone pulses with a weak second harmonic.
    LowPulse,
}

/// Class names of the fixture corpus and the archetype each one uses.
pub const SYNTH_CLASSES: [(&str, Archetype); 4] = [
    ("Barkbeetle", Archetype::LowPulse),
    ("Cicada", Archetype::BroadbandBuzz),
    ("Cricket", Archetype::TonalChirp),
    ("Termite", Archetype::ImpulsiveClick),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub clips_per_class: u32,
    pub clip_duration: f64,
    pub seed: u64,
    pub sample_rate: f64,
    pub window_seconds: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { clips_per_class: 5, clip_duration: 5.0, seed: 42, sample_rate: CANONICAL_SAMPLE_RATE, window_seconds: 1.0 }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.clips_per_class < 1 {
            return Err(DatasetError::InvalidParameter("clips_per_class must be >= 1".into()));
        }
        if !(self.window_seconds > 0.0) || self.clip_duration < self.window_seconds {
            return Err(DatasetError::InvalidParameter(format!(
                "clip duration {} must be >= window {}",
                self.clip_duration, self.window_seconds
            )));
        }
        if !(self.sample_rate > 0.0) {
            return Err(DatasetError::InvalidParameter("sample rate must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub class_name: String,
    pub clip_id: u32,
    pub archetype: Archetype,
    pub audio: AudioClip<f64>,
}

/// Second-order RBJ low/high-pass section.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    fn new(cutoff: f64, sr: f64, high_pass: bool) -> Self {
        let w0 = 2.0 * PI * cutoff / sr;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let c = w0.cos();
        let a0 = 1.0 + alpha;
        let b = if high_pass {
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0]
        } else {
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0]
        };
        Self { b: [b[0] / a0, b[1] / a0, b[2] / a0], a: [-2.0 * c / a0, (1.0 - alpha) / a0], z: [0.0; 2] }
    }

    fn tick(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }
}

fn hann(t: f64) -> f64 {
    0.5 - 0.5 * (2.0 * PI * t).cos()
}

/// Event onsets at a jittered rate; the first lands inside the first period.
fn onsets(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Vec<f64> {
    let period = 1.0 / rate;
    let mut t = rng.gen_range(0.0..period);
    let mut out = Vec::new();
    while t < duration {
        out.push(t);
        t += period * rng.gen_range(0.85..1.15);
    }
    out
}

fn render(archetype: Archetype, rng: &mut ChaCha8Rng, sr: f64, duration: f64) -> Vec<f64> {
    let n = (duration * sr).round() as usize;
    let mut x = vec![0.0; n];
    let amp = rng.gen_range(0.3..0.6);
    match archetype {
        Archetype::TonalChirp => {
            let f0 = 4500.0 + rng.gen_range(-200.0..200.0);
            let sweep = rng.gen_range(100.0..250.0);
            let rate = rng.gen_range(6.0..10.0);
            let len = rng.gen_range(0.04..0.06);
            for t0 in onsets(rng, rate, duration) {
                let start = (t0 * sr) as usize;
                let m = (len * sr) as usize;
                let mut phase = 0.0;
                for j in 0..m.min(n.saturating_sub(start)) {
                    let u = j as f64 / m as f64;
                    let f = f0 - sweep / 2.0 + sweep * u;
                    phase += 2.0 * PI * f / sr;
                    x[start + j] += amp * hann(u) * phase.sin();
                }
            }
        }
        Archetype::BroadbandBuzz => {
            let mut hp = [Biquad::new(3000.0, sr, true), Biquad::new(3000.0, sr, true)];
            let mut lp = [Biquad::new(8000.0, sr, false), Biquad::new(8000.0, sr, false)];
            let buzz = rng.gen_range(80.0..140.0);
            let depth = rng.gen_range(0.5..0.8);
            for (i, v) in x.iter_mut().enumerate() {
                let mut s = rng.gen_range(-1.0..1.0);
                for f in hp.iter_mut().chain(lp.iter_mut()) {
                    s = f.tick(s);
                }
                let t = i as f64 / sr;
                let env = 1.0 - depth * 0.5 * (1.0 + (2.0 * PI * buzz * t).cos());
                *v = amp * 1.5 * env * s;
            }
        }
        Archetype::ImpulsiveClick => {
            let rate = rng.gen_range(15.0..25.0);
            let tau = rng.gen_range(0.0005..0.0015);
            for t0 in onsets(rng, rate, duration) {
                let start = (t0 * sr) as usize;
                let m = (8.0 * tau * sr) as usize;
                let a = amp * rng.gen_range(0.7..1.0);
                for j in 0..m.min(n.saturating_sub(start)) {
                    let env = (-(j as f64) / (tau * sr)).exp();
                    x[start + j] += a * env * rng.gen_range(-1.0..1.0);
                }
            }
        }
        Archetype::LowPulse => {
            let fc = 1000.0 + rng.gen_range(-80.0..80.0);
            let rate = rng.gen_range(4.0..7.0);
            let len = rng.gen_range(0.015..0.03);
            for t0 in onsets(rng, rate, duration) {
                let start = (t0 * sr) as usize;
                let m = (len * sr) as usize;
                for j in 0..m.min(n.saturating_sub(start)) {
                    let u = j as f64 / m as f64;
                    let t = j as f64 / sr;
                    let tone = (2.0 * PI * fc * t).sin() + 0.3 * (4.0 * PI * fc * t).sin();
                    x[start + j] += amp * hann(u) * tone;
                }
            }
        }
    }
    let floor = rng.gen_range(0.003..0.01);
    for v in &mut x {
        *v = (*v + floor * rng.gen_range(-1.0..1.0)).clamp(-1.0, 1.0);
    }
    x
}

/// Renders the synthetic corpus in memory. A pure function of `spec`.
pub fn synth_clips(spec: &SynthSpec) -> Result<Vec<SynthClip>, DatasetError> {
    spec.validate()?;
    let jobs: Vec<(usize, u32)> =
        (0..SYNTH_CLASSES.len()).flat_map(|c| (1..=spec.clips_per_class).map(move |k| (c, k))).collect();
    Ok(jobs
        .par_iter()
        .map(|&(c, clip_id)| {
            let (name, archetype) = SYNTH_CLASSES[c];
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(((c as u64) << 32) | clip_id as u64);
            let samples = render(archetype, &mut rng, spec.sample_rate, spec.clip_duration);
            SynthClip {
                class_name: name.to_string(),
                clip_id,
                archetype,
                audio: AudioClip { samples, sample_rate: spec.sample_rate, source_path: None },
            }
        })
        .collect())
}

/// Writes the synthetic clips under `out_dir/clips/<Class>/clip<k>.wav` and
/// returns a manifest (relative to `out_dir`) with no instances yet.
pub fn synth_generate(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest, DatasetError> {
    let clips = synth_clips(spec)?;
    let mut manifest = DatasetManifest::new(spec.window_seconds);
    for (name, _) in SYNTH_CLASSES {
        manifest.classes.push(ClassEntry { name: name.to_string(), clips: Vec::new() });
    }
    for clip in clips {
        let rel = format!("clips/{}/clip{}.wav", clip.class_name, clip.clip_id);
        audio_io::write_wav(&clip.audio, out_dir.join(&rel))?;
        let class = manifest.classes.iter_mut().find(|c| c.name == clip.class_name).expect("known class");
        class.clips.push(ClipEntry {
            clip_id: clip.clip_id,
            path: rel,
            duration_s: clip.audio.duration_seconds(),
            instances: Vec::new(),
        });
    }
    Ok(manifest)
}
