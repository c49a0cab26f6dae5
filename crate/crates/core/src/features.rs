//! MFCC extraction, per-instance summaries and feature standardization.
//!
//! Pipeline per frame: centered reflect padding (`n_fft / 2` each side),
//! periodic Hann window, power spectrum of a length-`n_fft` FFT, Slaney-scale
//! area-normalized triangular mel filterbank, `10 log10(max(p, 1e-10))`, and an
//! orthonormal DCT-II over the mel axis truncated to `n_mfcc` coefficients.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio_io::AudioClip;
use crate::dataset::InstanceRecord;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Power floor applied before the logarithm.
pub const POWER_FLOOR: f64 = 1e-10;
/// Lower bound on a fitted column deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid MFCC configuration: {0}")]
    InvalidConfig(String),
    #[error("clip too short: {0} samples")]
    ClipTooShort(usize),
    #[error("instance {instance_id}")]
    Instance {
        instance_id: String,
        #[source]
        source: Box<FeatureError>,
    },
    #[error("instances disagree on {0}")]
    Inhomogeneous(String),
    #[error("width mismatch: expected {expected} columns, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("cannot fit a standardizer on zero rows")]
    EmptyFit,
    #[error("feature CSV: {0}")]
    Csv(String),
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
}

const LIN_SLOPE: f64 = 200.0 / 3.0;
const LOG_BREAK_HZ: f64 = 1000.0;
const LOG_BREAK_MEL: f64 = LOG_BREAK_HZ / LIN_SLOPE;

#[inline]
fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= LOG_BREAK_HZ {
        LOG_BREAK_MEL + (hz / LOG_BREAK_HZ).ln() / log_step()
    } else {
        hz / LIN_SLOPE
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= LOG_BREAK_MEL {
        LOG_BREAK_HZ * (log_step() * (mel - LOG_BREAK_MEL)).exp()
    } else {
        mel * LIN_SLOPE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatSet {
    Mean,
    MeanStd,
}

impl StatSet {
    pub fn count(self) -> usize {
        match self {
            StatSet::Mean => 1,
            StatSet::MeanStd => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StatSet::Mean => "mean",
            StatSet::MeanStd => "mean,std",
        }
    }
}

impl std::str::FromStr for StatSet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        match parts.as_slice() {
            ["mean"] => Ok(StatSet::Mean),
            ["mean", "std"] | ["std", "mean"] => Ok(StatSet::MeanStd),
            _ => Err(format!("unknown stats '{s}', expected 'mean' or 'mean,std'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_mfcc: usize,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub stats: StatSet,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self { n_mfcc: 40, n_fft: 2048, hop: 512, n_mels: 128, fmin: 0.0, fmax: None, stats: StatSet::Mean }
    }
}

impl MfccConfig {
    pub fn with_n_mfcc(mut self, n: usize) -> Self {
        self.n_mfcc = n;
        self
    }

    pub fn with_stats(mut self, stats: StatSet) -> Self {
        self.stats = stats;
        self
    }

    pub fn fmax_for(&self, sample_rate: f64) -> f64 {
        self.fmax.unwrap_or(sample_rate / 2.0)
    }

    /// Width of the summarized feature vector.
    pub fn feature_width(&self) -> usize {
        self.n_mfcc * self.stats.count()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols: Vec<String> = (0..self.n_mfcc).map(|i| format!("mfcc_mean_{i}")).collect();
        if self.stats == StatSet::MeanStd {
            cols.extend((0..self.n_mfcc).map(|i| format!("mfcc_std_{i}")));
        }
        cols
    }

    pub fn validate(&self, sample_rate: f64) -> Result<(), FeatureError> {
        let bad = |m: String| Err(FeatureError::InvalidConfig(m));
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!("need 0 < n_mfcc ({}) <= n_mels ({})", self.n_mfcc, self.n_mels));
        }
        if self.n_fft < 2 || self.hop == 0 || self.hop > self.n_fft {
            return bad(format!("need n_fft >= 2 and 0 < hop ({}) <= n_fft ({})", self.hop, self.n_fft));
        }
        let fmax = self.fmax_for(sample_rate);
        if !(0.0 <= self.fmin && self.fmin < fmax && fmax <= sample_rate / 2.0) {
            return bad(format!("need 0 <= fmin ({}) < fmax ({fmax}) <= sr/2 ({})", self.fmin, sample_rate / 2.0));
        }
        Ok(())
    }
}

/// Triangular, area-normalized mel filters over `n_fft / 2 + 1` FFT bins.
///
/// Each filter is stored densely; `weights[m][k]` is the weight of bin `k` in band `m`.
pub fn mel_filterbank(sample_rate: f64, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let fft_freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * sample_rate / n_fft as f64).collect();
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            fft_freqs
                .iter()
                .map(|&f| {
                    let rise = (f - lo) / (mid - lo);
                    let fall = (hi - f) / (hi - mid);
                    rise.min(fall).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

/// Band edges `(lower, center, upper)` in Hz of each mel filter.
pub fn mel_band_edges(n_mels: usize, fmin: f64, fmax: f64) -> Vec<(f64, f64, f64)> {
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let e: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    (0..n_mels).map(|m| (e[m], e[m + 1], e[m + 2])).collect()
}

fn dct_scale(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Rows `0..n_out` of the orthonormal DCT-II matrix of size `n`.
pub fn dct_ii_matrix<T: Scalar>(n_out: usize, n: usize) -> Matrix<T> {
    let mut m = Matrix::zeros(n_out, n);
    for k in 0..n_out {
        let s = dct_scale(k, n);
        for i in 0..n {
            let angle = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64;
            m.set(k, i, T::lit(s * angle.cos()));
        }
    }
    m
}

/// Orthonormal DCT-II of `x`.
pub fn dct_ii<T: Scalar>(x: &[T]) -> Vec<T> {
    let m = dct_ii_matrix::<T>(x.len(), x.len());
    m.iter_rows().map(|r| r.iter().zip(x).map(|(&a, &b)| a * b).sum()).collect()
}

/// Inverse of [`dct_ii`] (orthonormal DCT-III).
pub fn idct_ii<T: Scalar>(c: &[T]) -> Vec<T> {
    let n = c.len();
    let m = dct_ii_matrix::<T>(n, n);
    (0..n).map(|i| (0..n).map(|k| m.get(k, i) * c[k]).sum()).collect()
}

/// Index into a signal of length `n` under mirror reflection without edge repeat.
#[inline]
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Number of frames produced for `len` samples under centered framing.
pub fn frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

/// MFCC matrix for one clip, `n_mfcc x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccFrames<T> {
    pub coeffs: Matrix<T>,
    pub instance_id: Option<String>,
}

impl<T: Scalar> MfccFrames<T> {
    pub fn n_mfcc(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.coeffs.cols()
    }
}

/// Precomputed window, filterbank, FFT plan and DCT for one `(config, rate)` pair.
///
/// Shareable across threads; every call allocates its own scratch.
pub struct MfccExtractor<T: Scalar> {
    cfg: MfccConfig,
    sample_rate: f64,
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    /// Sparse filters: first non-zero bin and the contiguous weights from there.
    filters: Vec<(usize, Vec<T>)>,
    dct: Matrix<T>,
}

impl<T: Scalar> MfccExtractor<T> {
    pub fn new(cfg: &MfccConfig, sample_rate: f64) -> Result<Self, FeatureError> {
        cfg.validate(sample_rate)?;
        let n_fft = cfg.n_fft;
        let fft = FftPlanner::<T>::new().plan_fft_forward(n_fft);
        let window = (0..n_fft)
            .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos()))
            .collect();
        let dense = mel_filterbank(sample_rate, n_fft, cfg.n_mels, cfg.fmin, cfg.fmax_for(sample_rate));
        let filters = dense
            .into_iter()
            .map(|w| {
                let start = w.iter().position(|&v| v > 0.0).unwrap_or(0);
                let end = w.iter().rposition(|&v| v > 0.0).map_or(start, |e| e + 1);
                (start, w[start..end].iter().map(|&v| T::lit(v)).collect())
            })
            .collect();
        let dct = dct_ii_matrix(cfg.n_mfcc, cfg.n_mels);
        Ok(Self { cfg: cfg.clone(), sample_rate, fft, window, filters, dct })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.cfg
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Log-mel (dB) spectrogram, one `n_mels` vector per frame.
    pub fn log_mel(&self, samples: &[T]) -> Result<Vec<Vec<T>>, FeatureError> {
        if samples.is_empty() {
            return Err(FeatureError::ClipTooShort(0));
        }
        let n_fft = self.cfg.n_fft;
        let pad = (n_fft / 2) as isize;
        let n_frames = frame_count(samples.len(), self.cfg.hop);
        let n_bins = n_fft / 2 + 1;
        let floor = T::lit(POWER_FLOOR);
        let ten = T::lit(10.0);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.fft.get_inplace_scratch_len()];
        let mut power = vec![T::zero(); n_bins];
        let mut out = Vec::with_capacity(n_frames);
        for f in 0..n_frames {
            let start = (f * self.cfg.hop) as isize - pad;
            for (j, c) in buf.iter_mut().enumerate() {
                let s = samples[reflect_index(start + j as isize, samples.len())];
                *c = Complex::new(s * self.window[j], T::zero());
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf) {
                *p = c.norm_sqr();
            }
            let frame: Vec<T> = self
                .filters
                .iter()
                .map(|(start, w)| {
                    let e: T = w.iter().zip(&power[*start..]).map(|(&a, &b)| a * b).sum();
                    ten * e.max(floor).log10()
                })
                .collect();
            out.push(frame);
        }
        Ok(out)
    }

    pub fn compute(&self, clip: &AudioClip<T>) -> Result<MfccFrames<T>, FeatureError> {
        let log_mel = self.log_mel(&clip.samples)?;
        let n_frames = log_mel.len();
        let mut coeffs = Matrix::zeros(self.cfg.n_mfcc, n_frames);
        for (f, mel) in log_mel.iter().enumerate() {
            for k in 0..self.cfg.n_mfcc {
                let v: T = self.dct.row(k).iter().zip(mel).map(|(&a, &b)| a * b).sum();
                coeffs.set(k, f, v);
            }
        }
        Ok(MfccFrames { coeffs, instance_id: None })
    }

    /// MFCCs summarized into one feature vector according to the configured stats.
    pub fn features(&self, clip: &AudioClip<T>) -> Result<Vec<T>, FeatureError> {
        Ok(summarize(&self.compute(clip)?, self.cfg.stats))
    }
}

pub fn mfcc<T: Scalar>(clip: &AudioClip<T>, cfg: &MfccConfig) -> Result<MfccFrames<T>, FeatureError> {
    if clip.is_empty() {
        return Err(FeatureError::ClipTooShort(0));
    }
    MfccExtractor::new(cfg, clip.sample_rate)?.compute(clip)
}

/// Per-coefficient mean (and population std) across frames, means first.
pub fn summarize<T: Scalar>(frames: &MfccFrames<T>, stats: StatSet) -> Vec<T> {
    let n = frames.n_frames();
    let nf = T::from_usize_lossy(n.max(1));
    let means: Vec<T> = frames.coeffs.iter_rows().map(|r| r.iter().copied().sum::<T>() / nf).collect();
    let mut out = means.clone();
    if stats == StatSet::MeanStd {
        for (r, &m) in frames.coeffs.iter_rows().zip(&means) {
            let var = r.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / nf;
            out.push(var.sqrt());
        }
    }
    out
}

/// Labeled feature rows with clip-group provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub data: Matrix<T>,
    pub columns: Vec<String>,
    pub instance_ids: Vec<String>,
    pub labels: Vec<String>,
    pub groups: Vec<u32>,
    pub augmented: Vec<bool>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn empty(columns: Vec<String>) -> Self {
        Self {
            data: Matrix::zeros(0, columns.len()),
            columns,
            instance_ids: Vec::new(),
            labels: Vec::new(),
            groups: Vec::new(),
            augmented: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.data.rows()
    }

    pub fn width(&self) -> usize {
        self.data.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(idx),
            columns: self.columns.clone(),
            instance_ids: idx.iter().map(|&i| self.instance_ids[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
            augmented: idx.iter().map(|&i| self.augmented[i]).collect(),
        }
    }

    /// Keeps the first `n` MFCC coefficients of each statistic block.
    pub fn prefix_coefficients(&self, n_mfcc: usize, stats: StatSet) -> Self {
        let old_n = self.width() / stats.count();
        let n = n_mfcc.min(old_n);
        let keep: Vec<usize> = (0..stats.count()).flat_map(|b| (0..n).map(move |i| b * old_n + i)).collect();
        let mut data = Matrix::zeros(self.n_rows(), keep.len());
        for r in 0..self.n_rows() {
            for (j, &c) in keep.iter().enumerate() {
                data.set(r, j, self.data.get(r, c));
            }
        }
        Self { data, columns: keep.iter().map(|&c| self.columns[c].clone()).collect(), ..self.clone() }
    }

    pub fn check_finite(&self) -> Result<(), FeatureError> {
        for (i, r) in self.data.iter_rows().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Writes the `instance_id,clip_id,label,<features>` CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut header = vec!["instance_id".to_string(), "clip_id".into(), "label".into()];
        header.extend(self.columns.iter().cloned());
        wr.write_record(&header).map_err(err)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.instance_ids[i].clone(), self.groups[i].to_string(), self.labels[i].clone()];
            rec.extend(self.data.row(i).iter().map(|v| v.to_string()));
            wr.write_record(&rec).map_err(err)?;
        }
        wr.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }

    /// Reads a CSV written by [`FeatureMatrix::write_csv`]. Augmentation flags are
    /// recovered from the `__speed` / `__pitch` instance-id suffixes.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, FeatureError> {
        let mut rd = csv::Reader::from_reader(r);
        let err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let header = rd.headers().map_err(err)?.clone();
        if header.len() < 3 || &header[0] != "instance_id" || &header[1] != "clip_id" || &header[2] != "label" {
            return Err(FeatureError::Csv("header must start with instance_id,clip_id,label".into()));
        }
        let columns: Vec<String> = header.iter().skip(3).map(String::from).collect();
        let width = columns.len();
        let mut out = Self::empty(columns);
        let mut data = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(err)?;
            if rec.len() != width + 3 {
                return Err(FeatureError::Csv(format!("row {line}: expected {} fields, got {}", width + 3, rec.len())));
            }
            let id = rec[0].to_string();
            out.augmented.push(id.contains("__speed") || id.contains("__pitch"));
            out.instance_ids.push(id);
            out.groups
                .push(rec[1].parse().map_err(|_| FeatureError::Csv(format!("row {line}: bad clip_id '{}'", &rec[1])))?);
            out.labels.push(rec[2].to_string());
            for f in rec.iter().skip(3) {
                let v: f64 = f.parse().map_err(|_| FeatureError::Csv(format!("row {line}: bad value '{f}'")))?;
                data.push(T::lit(v));
            }
        }
        let rows = out.labels.len();
        out.data = Matrix::from_vec(rows, width, data).expect("row widths checked");
        out.check_finite()?;
        Ok(out)
    }
}

/// Extracts summarized MFCC rows for every instance, in input order.
pub fn build_feature_matrix<T: Scalar>(
    instances: &[InstanceRecord<T>],
    cfg: &MfccConfig,
) -> Result<FeatureMatrix<T>, FeatureError> {
    let columns = cfg.column_names();
    let Some(first) = instances.first() else {
        return Ok(FeatureMatrix::empty(columns));
    };
    let sr = first.audio.sample_rate;
    let len = first.audio.len();
    for inst in instances {
        if inst.audio.sample_rate != sr {
            return Err(FeatureError::Inhomogeneous(format!(
                "sample rate ({} has {}, expected {sr})",
                inst.instance_id, inst.audio.sample_rate
            )));
        }
        if inst.audio.len() != len {
            return Err(FeatureError::Inhomogeneous(format!(
                "duration ({} has {} samples, expected {len})",
                inst.instance_id,
                inst.audio.len()
            )));
        }
    }
    let extractor = MfccExtractor::<T>::new(cfg, sr)?;
    let rows: Vec<Vec<T>> = instances
        .par_iter()
        .map(|inst| {
            extractor.features(&inst.audio).map_err(|e| FeatureError::Instance {
                instance_id: inst.instance_id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_, _>>()?;
    let fm = FeatureMatrix {
        data: Matrix::from_rows(&rows, columns.len()).expect("uniform width"),
        columns,
        instance_ids: instances.iter().map(|i| i.instance_id.clone()).collect(),
        labels: instances.iter().map(|i| i.class_label.clone()).collect(),
        groups: instances.iter().map(|i| i.clip_id).collect(),
        augmented: instances.iter().map(|i| i.augmented).collect(),
    };
    fm.check_finite()?;
    Ok(fm)
}

/// Per-column z-scoring learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(train: &Matrix<T>) -> Result<Self, FeatureError> {
        let n = train.rows();
        if n == 0 {
            return Err(FeatureError::EmptyFit);
        }
        let nf = T::from_usize_lossy(n);
        let d = train.cols();
        let mut mean = vec![T::zero(); d];
        for r in train.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nf);
        let mut var = vec![T::zero(); d];
        for r in train.iter_rows() {
            for ((s, &v), &m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let floor = T::lit(STD_FLOOR);
        let std = var.into_iter().map(|s| (s / nf).sqrt().max(floor)).collect();
        Ok(Self { mean, std })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[T]) -> Result<Vec<T>, FeatureError> {
        if row.len() != self.width() {
            return Err(FeatureError::WidthMismatch { expected: self.width(), actual: row.len() });
        }
        Ok(row.iter().zip(&self.mean).zip(&self.std).map(|((&x, &m), &s)| (x - m) / s).collect())
    }

    pub fn apply(&self, m: &Matrix<T>) -> Result<Matrix<T>, FeatureError> {
        if m.cols() != self.width() {
            return Err(FeatureError::WidthMismatch { expected: self.width(), actual: m.cols() });
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((v, &mu), &s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / s;
            }
        }
        Ok(out)
    }
}

pub fn fit_standardizer<T: Scalar>(train: &FeatureMatrix<T>) -> Result<Standardizer<T>, FeatureError> {
    Standardizer::fit(&train.data)
}

pub fn apply_standardizer<T: Scalar>(
    s: &Standardizer<T>,
    m: &FeatureMatrix<T>,
) -> Result<FeatureMatrix<T>, FeatureError> {
    Ok(FeatureMatrix { data: s.apply(&m.data)?, ..m.clone() })
}
