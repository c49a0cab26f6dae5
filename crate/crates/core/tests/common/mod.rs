//! Brute-force reference implementations used as test oracles. Deliberately
//! slow and std-only; nothing here calls into the library under test.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Slaney mel scale, written out from its definition.
pub fn mel(hz: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    if hz < min_log_hz {
        hz / f_sp
    } else {
        min_log_hz / f_sp + (hz / min_log_hz).ln() * 27.0 / 6.4f64.ln()
    }
}

pub fn mel_inv(m: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_mel = 1000.0 / f_sp;
    if m < min_log_mel {
        m * f_sp
    } else {
        1000.0 * ((m - min_log_mel) * 6.4f64.ln() / 27.0).exp()
    }
}

/// Area-normalized triangular filters, `n_mels x (n_fft/2 + 1)`.
pub fn filterbank(sr: f64, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (mel(fmin), mel(fmax));
    let pts: Vec<f64> = (0..n_mels + 2).map(|i| mel_inv(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64)).collect();
    let bins = n_fft / 2 + 1;
    (0..n_mels)
        .map(|m| {
            let (a, b, c) = (pts[m], pts[m + 1], pts[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sr / n_fft as f64;
                    let w = if f > a && f <= b {
                        (f - a) / (b - a)
                    } else if f > b && f < c {
                        (c - f) / (c - b)
                    } else {
                        0.0
                    };
                    w * 2.0 / (c - a)
                })
                .collect()
        })
        .collect()
}

/// `|X_k|^2` for `k = 0..=n/2` by the defining sum.
pub fn dft_power(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let ph = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += x * ph.cos();
                im += x * ph.sin();
            }
            re * re + im * im
        })
        .collect()
}

/// Orthonormal DCT-II, first `n_out` terms.
pub fn dct(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..n_out)
        .map(|k| {
            let s: f64 = x.iter().enumerate().map(|(i, &v)| v * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos()).sum();
            s * if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() }
        })
        .collect()
}

/// Index into `x` padded by mirror reflection (edge sample not repeated).
fn mirrored(x: &[f64], i: isize) -> f64 {
    let n = x.len() as isize;
    if n == 1 {
        return x[0];
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    x[j as usize]
}

/// MFCC frames `[frame][coef]` computed without FFTs or shared helpers.
pub fn naive_mfcc(x: &[f64], sr: f64, n_mfcc: usize, n_fft: usize, hop: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let fb = filterbank(sr, n_fft, n_mels, 0.0, sr / 2.0);
    let window: Vec<f64> = (0..n_fft).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n_fft as f64).cos()).collect();
    let n_frames = 1 + x.len() / hop;
    (0..n_frames)
        .map(|f| {
            let start = (f * hop) as isize - (n_fft / 2) as isize;
            let frame: Vec<f64> = (0..n_fft).map(|i| mirrored(x, start + i as isize) * window[i]).collect();
            let p = dft_power(&frame);
            let logmel: Vec<f64> = fb
                .iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(&p).map(|(a, b)| a * b).sum();
                    10.0 * e.max(1e-10).log10()
                })
                .collect();
            dct(&logmel, n_mfcc)
        })
        .collect()
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

/// Best single split of 1-D data by enumerating every midpoint:
/// `(threshold, impurity decrease)`.
pub fn best_midpoint_split(x: &[f64], y: &[usize], k: usize) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup();
    let count = |idx: &[usize]| {
        let mut c = vec![0; k];
        idx.iter().for_each(|&i| c[y[i]] += 1);
        c
    };
    let all: Vec<usize> = (0..x.len()).collect();
    let parent = gini(&count(&all));
    let n = x.len() as f64;
    let mut best: Option<(f64, f64)> = None;
    for w in v.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let l: Vec<usize> = all.iter().copied().filter(|&i| x[i] <= t).collect();
        let r: Vec<usize> = all.iter().copied().filter(|&i| x[i] > t).collect();
        let child = l.len() as f64 / n * gini(&count(&l)) + r.len() as f64 / n * gini(&count(&r));
        let gain = parent - child;
        if best.is_none_or(|b| gain > b.1 + 1e-15) {
            best = Some((t, gain));
        }
    }
    best
}

/// k-NN by fully sorting all distances. Distance ties keep the lower row;
/// vote ties go to the smaller summed distance, then the lower class.
pub fn brute_knn(train: &[Vec<f64>], labels: &[usize], q: &[f64], k: usize, n_classes: usize) -> usize {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
        .collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut votes = vec![0usize; n_classes];
    let mut dist = vec![0.0f64; n_classes];
    for &(di, i) in &d[..k] {
        votes[labels[i]] += 1;
        dist[labels[i]] += di;
    }
    let top = *votes.iter().max().unwrap();
    (0..n_classes)
        .filter(|&c| votes[c] == top)
        .min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b)))
        .unwrap()
}

/// Frequency of the largest DFT magnitude bin (DC excluded) and the bin width.
pub fn dominant_frequency(x: &[f64], sr: f64) -> (f64, f64) {
    let p = dft_power(x);
    let (bin, _) = p.iter().enumerate().skip(1).fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    let width = sr / x.len() as f64;
    (bin as f64 * width, width)
}

/// Share of spectral energy inside `[lo, hi]` Hz.
pub fn band_energy_ratio(x: &[f64], sr: f64, lo: f64, hi: f64) -> f64 {
    let p = dft_power(x);
    let width = sr / x.len() as f64;
    let total: f64 = p.iter().skip(1).sum();
    let inside: f64 = p.iter().enumerate().skip(1).filter(|(i, _)| (lo..=hi).contains(&(*i as f64 * width))).map(|(_, v)| v).sum();
    inside / total
}

/// Maximizes the SVM dual by projected gradient ascent onto
/// `{0 <= a <= c, sum a_i y_i = 0}`; returns the optimal objective value.
pub fn svm_dual_optimum(kernel: &[Vec<f64>], y: &[f64], c: f64, iters: usize) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i][j];
    let lip: f64 = (0..n).map(|i| (0..n).map(|j| q(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip.max(1e-12);
    let project = |v: &[f64]| {
        let clip = |mu: f64| v.iter().zip(y).map(|(&a, &s)| (a - mu * s).clamp(0.0, c)).collect::<Vec<f64>>();
        let g = |mu: f64| clip(mu).iter().zip(y).map(|(a, s)| a * s).sum::<f64>();
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(0.5 * (lo + hi))
    };
    let mut a = vec![0.0; n];
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q(i, j) * a[j]).sum::<f64>()).collect();
        let v: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
        a = project(&v);
    }
    svm_dual_objective(kernel, y, &a)
}

pub fn svm_dual_objective(kernel: &[Vec<f64>], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let lin: f64 = a.iter().sum();
    let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * a[j] * y[i] * y[j] * kernel[i][j]).sum::<f64>()).sum();
    lin - 0.5 * quad
}

/// Deterministic xorshift stream for test data; keeps the oracles free of
/// the RNG crates the library uses.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform().max(1e-300);
        let v = self.uniform();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    }
}

pub fn sine(freq: f64, sr: f64, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / sr).sin()).collect()
}
