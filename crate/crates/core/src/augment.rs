//! Speed and frame-rate augmentation.
//!
//! Both transforms are resampling operations that scale every frequency by
//! `factor` and the duration by `1 / factor`. They are kept as two named
//! operations because they are produced and logged separately; `speed_change`
//! interpolates directly, `pitch_shift` relabels the rate and resamples back.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::{self, interpolate, AudioClip};
use crate::dataset::{self, DatasetError, DatasetManifest, InstanceEntry, InstanceRecord};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("factor must be a positive finite number, got {0}")]
    InvalidFactor(f64),
    #[error("{transform} of a {len}-sample clip leaves no samples")]
    DegenerateOutput { transform: String, len: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "factor", rename_all = "snake_case")]
pub enum Transform {
    Speed(f64),
    Pitch(f64),
}

impl Transform {
    /// Suffix appended to the source instance id, e.g. `speed0.9`.
    pub fn tag(&self) -> String {
        match self {
            Transform::Speed(f) => format!("speed{f}"),
            Transform::Pitch(f) => format!("pitch{f}"),
        }
    }

    pub fn apply<T: Scalar>(&self, clip: &AudioClip<T>) -> Result<AudioClip<T>, AugmentError> {
        match *self {
            Transform::Speed(f) => speed_change(clip, f),
            Transform::Pitch(f) => pitch_shift(clip, f),
        }
    }
}

fn check_factor(f: f64) -> Result<(), AugmentError> {
    if f > 0.0 && f.is_finite() {
        Ok(())
    } else {
        Err(AugmentError::InvalidFactor(f))
    }
}

/// Plays the clip `factor` times faster at the same nominal rate.
pub fn speed_change<T: Scalar>(clip: &AudioClip<T>, factor: f64) -> Result<AudioClip<T>, AugmentError> {
    check_factor(factor)?;
    if factor == 1.0 {
        return Ok(clip.clone());
    }
    let out_len = (clip.len() as f64 / factor).round() as usize;
    if out_len == 0 {
        return Err(AugmentError::DegenerateOutput { transform: Transform::Speed(factor).tag(), len: clip.len() });
    }
    Ok(AudioClip {
        samples: interpolate(&clip.samples, factor, out_len),
        sample_rate: clip.sample_rate,
        source_path: clip.source_path.clone(),
    })
}

/// Declares the samples to be at `factor * rate`, then resamples to the original rate.
pub fn pitch_shift<T: Scalar>(clip: &AudioClip<T>, factor: f64) -> Result<AudioClip<T>, AugmentError> {
    check_factor(factor)?;
    let reinterpreted = AudioClip {
        samples: clip.samples.clone(),
        sample_rate: clip.sample_rate * factor,
        source_path: clip.source_path.clone(),
    };
    let out = audio_io::resample(&reinterpreted, clip.sample_rate);
    if out.is_empty() {
        return Err(AugmentError::DegenerateOutput { transform: Transform::Pitch(factor).tag(), len: clip.len() });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub speed_factors: Vec<f64>,
    pub pitch_factors: Vec<f64>,
    /// Unused by the deterministic transforms.
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self { speed_factors: vec![0.9, 1.1], pitch_factors: vec![0.9, 1.1], seed: 42 }
    }
}

impl AugmentSpec {
    pub fn transforms(&self) -> Vec<Transform> {
        self.speed_factors
            .iter()
            .map(|&f| Transform::Speed(f))
            .chain(self.pitch_factors.iter().map(|&f| Transform::Pitch(f)))
            .collect()
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        self.speed_factors.iter().chain(&self.pitch_factors).try_for_each(|&f| check_factor(f))
    }
}

pub fn augmented_id(source_id: &str, t: &Transform) -> String {
    format!("{source_id}__{}", t.tag())
}

/// Augmented copies of the original instances, refitted to `window_len`
/// samples: longer outputs are truncated, shorter ones discarded.
pub fn augment_instances<T: Scalar>(
    instances: &[InstanceRecord<T>],
    spec: &AugmentSpec,
    window_len: usize,
) -> Result<Vec<InstanceRecord<T>>, AugmentError> {
    spec.validate()?;
    let transforms = spec.transforms();
    let per: Vec<Vec<InstanceRecord<T>>> = instances
        .par_iter()
        .filter(|i| !i.augmented)
        .map(|inst| {
            let mut out = Vec::new();
            for t in &transforms {
                let mut audio = t.apply(&inst.audio)?;
                if audio.len() < window_len {
                    log::debug!("{}: {} output {} < {window_len} samples, discarded", inst.instance_id, t.tag(), audio.len());
                    continue;
                }
                audio.samples.truncate(window_len);
                out.push(InstanceRecord {
                    instance_id: augmented_id(&inst.instance_id, t),
                    class_label: inst.class_label.clone(),
                    clip_id: inst.clip_id,
                    audio,
                    augmented: true,
                    transform: Some(t.tag()),
                });
            }
            Ok(out)
        })
        .collect::<Result<_, AugmentError>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Augments every original instance of a manifest rooted at `root`, writing the
/// new WAVs next to their sources. Previously augmented entries are replaced;
/// original entries are left untouched.
pub fn augment_dataset(
    manifest: &DatasetManifest,
    root: &Path,
    spec: &AugmentSpec,
) -> Result<DatasetManifest, AugmentError> {
    spec.validate()?;
    let mut out = manifest.clone();
    for class in &mut out.classes {
        for clip in &mut class.clips {
            clip.instances.retain(|i| !i.augmented);
        }
    }
    if spec.transforms().is_empty() {
        return Ok(out);
    }
    let originals = dataset::load_instances::<f64>(&out, root)?;
    let mut fresh = Vec::new();
    for inst in &originals {
        let win = dataset::window_samples(out.window_seconds, inst.audio.sample_rate);
        fresh.extend(augment_instances(std::slice::from_ref(inst), spec, win)?);
    }
    fresh
        .par_iter()
        .map(|rec| {
            let rel = dataset::instance_rel_path(&rec.class_label, rec.clip_id, &rec.instance_id);
            audio_io::write_wav(&rec.audio, root.join(rel)).map_err(DatasetError::from)
        })
        .collect::<Result<Vec<()>, DatasetError>>()?;
    for rec in fresh {
        let class = out.classes.iter_mut().find(|c| c.name == rec.class_label).expect("class from manifest");
        let clip = class.clips.iter_mut().find(|c| c.clip_id == rec.clip_id).expect("clip from manifest");
        clip.instances.push(InstanceEntry {
            path: dataset::instance_rel_path(&rec.class_label, rec.clip_id, &rec.instance_id),
            instance_id: rec.instance_id,
            augmented: true,
            transform: rec.transform,
        });
    }
    Ok(out)
}
