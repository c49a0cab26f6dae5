mod common;

use chitin::audio_io::AudioClip;
use chitin::dataset::InstanceRecord;
use chitin::features::{
    build_feature_matrix, dct_ii, frame_count, hz_to_mel, idct_ii, mel_filterbank, mel_to_hz, summarize, MfccConfig, MfccExtractor, StatSet,
};
use common::{naive_mfcc, TestRng};
use proptest::prelude::*;

const SR: f64 = 44_100.0;

fn clip(samples: Vec<f64>) -> AudioClip<f64> {
    AudioClip::new(samples, SR).unwrap()
}

#[test]
fn pipeline_matches_direct_dft_oracle() {
    let cfg = MfccConfig::default();
    let ex = MfccExtractor::<f64>::new(&cfg, SR).unwrap();
    let mut rng = TestRng::new(11);
    for trial in 0..6 {
        let len = 400 + rng.below(1800);
        let x: Vec<f64> = match trial % 3 {
            0 => (0..len).map(|_| rng.range(-1.0, 1.0)).collect(),
            1 => common::sine(rng.range(100.0, 15_000.0), SR, len, 0.8),
            _ => (0..len).map(|i| 0.5 * (i as f64 * 0.01).sin() + 0.1 * rng.normal()).collect(),
        };
        let got = ex.compute(&clip(x.clone())).unwrap();
        let want = naive_mfcc(&x, SR, cfg.n_mfcc, cfg.n_fft, cfg.hop, cfg.n_mels);
        assert_eq!(got.n_frames(), want.len());
        for (f, frame) in want.iter().enumerate() {
            for (c, &w) in frame.iter().enumerate() {
                let g = got.coeffs.get(c, f);
                assert!((g - w).abs() < 1e-6, "trial {trial} frame {f} coef {c}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn filterbank_matches_oracle() {
    let lib = mel_filterbank(SR, 2048, 128, 0.0, SR / 2.0);
    let reference = common::filterbank(SR, 2048, 128, 0.0, SR / 2.0);
    for (a, b) in lib.iter().zip(&reference) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn silence_gives_floor_cepstrum() {
    let frames = MfccExtractor::<f64>::new(&MfccConfig::default(), SR).unwrap().compute(&clip(vec![0.0; 44_100])).unwrap();
    let c0 = -100.0 * 128f64.sqrt();
    for f in 0..frames.n_frames() {
        assert!((frames.coeffs.get(0, f) - c0).abs() < 1e-6);
        for c in 1..frames.n_mfcc() {
            assert!(frames.coeffs.get(c, f).abs() < 1e-6);
        }
    }
}

#[test]
fn one_second_has_87_frames() {
    assert_eq!(frame_count(44_100, 512), 87);
    let frames = MfccExtractor::<f64>::new(&MfccConfig::default(), SR).unwrap().compute(&clip(common::sine(440.0, SR, 44_100, 0.5))).unwrap();
    assert_eq!((frames.n_mfcc(), frames.n_frames()), (40, 87));
}

#[test]
fn mel_identities() {
    assert!((hz_to_mel(1000.0) - 15.0).abs() < 1e-12);
    assert!((hz_to_mel(1000.0) - common::mel(1000.0)).abs() < 1e-12);
    for hz in [0.0, 123.0, 999.0, 1000.0, 4500.0, 22_050.0] {
        assert!((hz_to_mel(hz) - common::mel(hz)).abs() < 1e-12);
        assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
    }
}

#[test]
fn amplitude_gain_moves_only_c0() {
    let mut rng = TestRng::new(5);
    let x: Vec<f64> = (0..44_100).map(|_| 0.2 * rng.normal()).collect();
    let ex = MfccExtractor::<f64>::new(&MfccConfig::default(), SR).unwrap();
    let base = ex.compute(&clip(x.clone())).unwrap();
    for g in [0.25, 3.0] {
        let scaled = ex.compute(&clip(x.iter().map(|v| v * g).collect())).unwrap();
        let shift = 10.0 * (g * g).log10() * 128f64.sqrt();
        for f in 0..base.n_frames() {
            assert!((scaled.coeffs.get(0, f) - base.coeffs.get(0, f) - shift).abs() < 1e-6);
            for c in 1..base.n_mfcc() {
                assert!((scaled.coeffs.get(c, f) - base.coeffs.get(c, f)).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn f32_pipeline_tracks_f64() {
    let x = common::sine(1234.0, SR, 8192, 0.7);
    let cfg = MfccConfig::default().with_n_mfcc(13);
    let a = MfccExtractor::<f64>::new(&cfg, SR).unwrap().features(&clip(x.clone())).unwrap();
    let b = MfccExtractor::<f32>::new(&cfg, SR)
        .unwrap()
        .features(&AudioClip::new(x.iter().map(|&v| v as f32).collect(), SR).unwrap())
        .unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert!((p - *q as f64).abs() < 1e-2 * p.abs().max(1.0), "{p} vs {q}");
    }
}

#[test]
fn mean_std_summary_is_ordered_means_then_stds() {
    let x = common::sine(300.0, SR, 44_100, 0.5);
    let ex = MfccExtractor::<f64>::new(&MfccConfig::default().with_n_mfcc(4), SR).unwrap();
    let frames = ex.compute(&clip(x)).unwrap();
    let s = summarize(&frames, StatSet::MeanStd);
    assert_eq!(s.len(), 8);
    for c in 0..4 {
        let row: Vec<f64> = (0..frames.n_frames()).map(|f| frames.coeffs.get(c, f)).collect();
        let mean = row.iter().sum::<f64>() / row.len() as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / row.len() as f64;
        assert!((s[c] - mean).abs() < 1e-9);
        assert!((s[4 + c] - var.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn truncated_wide_features_equal_direct_extraction() {
    let mut rng = TestRng::new(31);
    let instances: Vec<InstanceRecord<f64>> = (0..4)
        .map(|i| InstanceRecord {
            instance_id: format!("A_clip1_{i:04}"),
            class_label: "A".into(),
            clip_id: 1,
            audio: clip((0..8192).map(|_| 0.3 * rng.normal()).collect()),
            augmented: false,
            transform: None,
        })
        .collect();
    for stats in [StatSet::Mean, StatSet::MeanStd] {
        let wide = build_feature_matrix(&instances, &MfccConfig::default().with_n_mfcc(40).with_stats(stats)).unwrap();
        for n in [10, 20, 30] {
            let direct = build_feature_matrix(&instances, &MfccConfig::default().with_n_mfcc(n).with_stats(stats)).unwrap();
            let cut = wide.prefix_coefficients(n, stats);
            assert_eq!(cut.columns, direct.columns);
            for (a, b) in cut.data.as_slice().iter().zip(direct.data.as_slice()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }
}

proptest! {
    #[test]
    fn dct_round_trip(v in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let back = idct_ii(&dct_ii(&v));
        for (a, b) in v.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn dct_matches_oracle(v in prop::collection::vec(-10.0f64..10.0, 2..64)) {
        let lib = dct_ii(&v);
        let want = common::dct(&v, v.len());
        for (a, b) in lib.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn frame_count_law(len in 1usize..200_000, hop in 1usize..4096) {
        prop_assert_eq!(frame_count(len, hop), 1 + len / hop);
    }

    #[test]
    fn feature_width_law(n in 1usize..=128, with_std in any::<bool>()) {
        let stats = if with_std { StatSet::MeanStd } else { StatSet::Mean };
        let cfg = MfccConfig::default().with_n_mfcc(n).with_stats(stats);
        let x = common::sine(500.0, SR, 4096, 0.3);
        let v = MfccExtractor::<f64>::new(&cfg, SR).unwrap().features(&clip(x)).unwrap();
        prop_assert_eq!(v.len(), n * stats.count());
        prop_assert_eq!(cfg.column_names().len(), v.len());
    }
}
