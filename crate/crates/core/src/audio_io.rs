//! WAV ingestion and the canonical in-memory clip.
//!
//! Reads RIFF/WAVE files holding 16-bit PCM, 24-bit PCM or 32-bit IEEE float
//! samples (mono or stereo), down-mixes to mono and resamples with linear
//! interpolation. Writing always produces 16-bit PCM mono with the canonical
//! 44-byte header.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

/// Rate every clip is brought to on ingestion.
pub const CANONICAL_SAMPLE_RATE: f64 = 44_100.0;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("truncated WAV payload: {0}")]
    TruncatedPayload(String),
    #[error("I/O failure on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
}

/// Mono audio at a known sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip<T> {
    pub samples: Vec<T>,
    /// Samples per second. Kept as a real so reinterpretation at a scaled rate is exact.
    pub sample_rate: f64,
    pub source_path: Option<String>,
}

impl<T: Scalar> AudioClip<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64) -> Result<Self, AudioError> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(AudioError::InvalidClip(format!("sample rate {sample_rate} must be > 0")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidClip(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate, source_path: None })
    }

    pub fn with_source(mut self, path: impl Into<String>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Converts the sample type, keeping rate and provenance.
    pub fn cast<U: Scalar>(&self) -> AudioClip<U> {
        AudioClip {
            samples: self.samples.iter().map(|s| U::lit(s.as_f64())).collect(),
            sample_rate: self.sample_rate,
            source_path: self.source_path.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Pcm24,
    Float32,
}

impl BitDepth {
    pub fn bytes_per_sample(self) -> usize {
        match self {
            BitDepth::Pcm16 => 2,
            BitDepth::Pcm24 => 3,
            BitDepth::Float32 => 4,
        }
    }
}

/// Decoded but not yet down-mixed WAV contents.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWav {
    pub channels: u16,
    pub bit_depth: BitDepth,
    pub frame_rate: u32,
    /// Interleaved samples scaled to [-1, 1].
    pub payload: Vec<f64>,
}

impl RawWav {
    pub fn frames(&self) -> usize {
        self.payload.len() / self.channels.max(1) as usize
    }
}

const WAVE_FORMAT_PCM: u16 = 1;
const WAVE_FORMAT_IEEE_FLOAT: u16 = 3;
const WAVE_FORMAT_EXTENSIBLE: u16 = 0xFFFE;

fn u16_le(b: &[u8]) -> u16 {
    u16::from_le_bytes([b[0], b[1]])
}

fn u32_le(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], b[3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<RawWav, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io { path: path.display().to_string(), source })?;
    decode_wav(&bytes)
}

/// Parses a WAV byte buffer.
pub fn decode_wav(bytes: &[u8]) -> Result<RawWav, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedHeader("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_le(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body_start + size > bytes.len() {
                    return Err(AudioError::MalformedHeader("short fmt chunk".into()));
                }
                let b = &bytes[body_start..body_start + size];
                let mut tag = u16_le(&b[0..2]);
                let channels = u16_le(&b[2..4]);
                let rate = u32_le(&b[4..8]);
                let bits = u16_le(&b[14..16]);
                if tag == WAVE_FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(AudioError::MalformedHeader("short extensible fmt chunk".into()));
                    }
                    // first two bytes of the sub-format GUID carry the real tag
                    tag = u16_le(&b[24..26]);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let end = body_start + size;
                if end > bytes.len() {
                    return Err(AudioError::TruncatedPayload(format!(
                        "data chunk declares {size} bytes, {} present",
                        bytes.len() - body_start
                    )));
                }
                data = Some(&bytes[body_start..end]);
                break;
            }
            _ => {}
        }
        pos = body_start + size + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| AudioError::MalformedHeader("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::TruncatedPayload("no data chunk".into()))?;

    let bit_depth = match (tag, bits) {
        (WAVE_FORMAT_PCM, 16) => BitDepth::Pcm16,
        (WAVE_FORMAT_PCM, 24) => BitDepth::Pcm24,
        (WAVE_FORMAT_IEEE_FLOAT, 32) => BitDepth::Float32,
        _ => {
            return Err(AudioError::UnsupportedEncoding(format!("format tag {tag} with {bits} bits per sample")));
        }
    };
    if !(1..=2).contains(&channels) {
        return Err(AudioError::UnsupportedEncoding(format!("{channels} channels")));
    }
    if rate == 0 {
        return Err(AudioError::MalformedHeader("zero frame rate".into()));
    }
    let block = channels as usize * bit_depth.bytes_per_sample();
    if data.len() % block != 0 {
        return Err(AudioError::TruncatedPayload(format!(
            "{} payload bytes is not a whole number of {block}-byte frames",
            data.len()
        )));
    }
    let payload = match bit_depth {
        BitDepth::Pcm16 => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32_768.0)
            .collect(),
        BitDepth::Pcm24 => data
            .chunks_exact(3)
            .map(|c| {
                let v = i32::from_le_bytes([0, c[0], c[1], c[2]]) >> 8;
                v as f64 / 8_388_608.0
            })
            .collect(),
        BitDepth::Float32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    Ok(RawWav { channels, bit_depth, frame_rate: rate, payload })
}

/// Averages channels frame by frame.
pub fn to_mono<T: Scalar>(raw: &RawWav) -> AudioClip<T> {
    let ch = raw.channels.max(1) as usize;
    let samples = if ch == 1 {
        raw.payload.iter().map(|&s| T::lit(s)).collect()
    } else {
        raw.payload
            .chunks_exact(ch)
            .map(|f| T::lit(f.iter().sum::<f64>() / ch as f64))
            .collect()
    };
    AudioClip { samples, sample_rate: raw.frame_rate as f64, source_path: None }
}

/// Reads a WAV file straight into a mono clip tagged with its path.
pub fn load_clip<T: Scalar>(path: impl AsRef<Path>) -> Result<AudioClip<T>, AudioError> {
    let path = path.as_ref();
    let raw = read_wav(path)?;
    let clip = to_mono::<T>(&raw);
    if clip.samples.iter().any(|s| !s.is_finite()) {
        return Err(AudioError::InvalidClip(format!("{} contains non-finite samples", path.display())));
    }
    Ok(clip.with_source(path.display().to_string()))
}

/// Length of a clip of `len` samples after resampling between the given rates.
pub fn resampled_len(len: usize, from_rate: f64, to_rate: f64) -> usize {
    (len as f64 * to_rate / from_rate).round() as usize
}

/// Linear interpolation of `samples` at fractional positions `i * step`, `i < out_len`.
pub(crate) fn interpolate<T: Scalar>(samples: &[T], step: f64, out_len: usize) -> Vec<T> {
    let n = samples.len();
    if n == 0 {
        return vec![T::zero(); out_len];
    }
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let i0 = pos.floor() as usize;
            if i0 + 1 >= n {
                return samples[n - 1];
            }
            let frac = T::lit(pos - i0 as f64);
            samples[i0] + (samples[i0 + 1] - samples[i0]) * frac
        })
        .collect()
}

/// Linear-interpolation resampler. Equal rates return an exact copy.
pub fn resample<T: Scalar>(clip: &AudioClip<T>, target_rate: f64) -> AudioClip<T> {
    assert!(target_rate > 0.0, "target rate must be positive");
    if target_rate == clip.sample_rate {
        return clip.clone();
    }
    let out_len = resampled_len(clip.len(), clip.sample_rate, target_rate);
    let step = clip.sample_rate / target_rate;
    AudioClip {
        samples: interpolate(&clip.samples, step, out_len),
        sample_rate: target_rate,
        source_path: clip.source_path.clone(),
    }
}

/// Encodes a clip as 16-bit PCM mono. Samples are clipped to [-1, 1].
pub fn encode_wav16<T: Scalar>(clip: &AudioClip<T>) -> Vec<u8> {
    let rate = clip.sample_rate.round() as u32;
    let data_len = (clip.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &clip.samples {
        out.extend_from_slice(&quantize16(s.as_f64()).to_le_bytes());
    }
    out
}

#[inline]
fn quantize16(x: f64) -> i16 {
    (x * 32_768.0).round().clamp(-32_768.0, 32_767.0) as i16
}

pub fn write_wav<T: Scalar>(clip: &AudioClip<T>, path: impl AsRef<Path>) -> Result<(), AudioError> {
    let path = path.as_ref();
    let io = |source| AudioError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(&encode_wav16(clip)).map_err(io)
}
