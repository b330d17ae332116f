use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn sine(freq: f64, n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| (2.0 * PI * freq * i as f64 / f64::from(SAMPLE_RATE)).sin() as f32)
        .collect()
}

fn clip(samples: Vec<f32>) -> WaveClip {
    WaveClip::new("test", samples, SAMPLE_RATE, 0, 1)
}

/// Direct O(N²) DFT power of one Hamming-windowed frame.
fn dft_power(frame: &[f32]) -> Vec<f64> {
    let n = frame.len();
    let w: Vec<f64> = (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, (&x, &wi)) in frame.iter().zip(&w).enumerate() {
                let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                re += f64::from(x) * wi * ang.cos();
                im += f64::from(x) * wi * ang.sin();
            }
            re * re + im * im
        })
        .collect()
}

#[test]
fn five_second_clip_frame_count() {
    // enumerate window starts directly
    let n = 220_500;
    let oracle = (0..).take_while(|f| f * HOP + N_FFT <= n).count();
    assert_eq!(oracle, 429);
    let spec = stft_power(&clip(vec![0.0; n])).unwrap();
    assert_eq!(spec.n_frames(), 429);
    assert_eq!(spec.n_bins(), 513);
    assert!(spec.values.data().iter().all(|&v| v == 0.0));
}

#[test]
fn too_short_clip_is_rejected() {
    let err = stft_power(&clip(vec![0.0; 1023])).unwrap_err();
    assert!(matches!(err, Error::TooShort(_)));
    assert_eq!(stft_power(&clip(vec![0.0; 1024])).unwrap().n_frames(), 1);
}

#[test]
fn sine_peaks_at_bin_ten() {
    let x = sine(440.0, 44_100);
    let spec = stft_power(&clip(x.clone())).unwrap();
    assert_eq!((440.0f64 * 1024.0 / 44_100.0).round() as usize, 10);
    for f in 0..spec.n_frames() {
        assert_eq!(spec.argmax_bin(f), 10, "frame {f}");
    }
    let oracle = dft_power(&x[3 * HOP..3 * HOP + N_FFT]);
    let oracle_argmax = (0..oracle.len()).max_by(|&a, &b| oracle[a].total_cmp(&oracle[b])).unwrap();
    assert_eq!(oracle_argmax, 10);
    let peak = oracle[10];
    for (k, &o) in oracle.iter().enumerate() {
        let got = f64::from(spec.values.get(k, 3));
        assert!((got - o).abs() <= 1e-6 * peak, "bin {k}: {got} vs {o}");
    }
}

#[test]
fn windowed_sine_power_is_concentrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let freq = rng.random_range(200.0..15_000.0);
        let spec = stft_power(&clip(sine(freq, 8192))).unwrap();
        let centre = (freq * N_FFT as f64 / f64::from(SAMPLE_RATE)).round() as usize;
        for f in 0..spec.n_frames() {
            let total: f64 = (0..N_BINS).map(|b| f64::from(spec.values.get(b, f))).sum();
            let near: f64 = (centre.saturating_sub(2)..=(centre + 2).min(N_BINS - 1))
                .map(|b| f64::from(spec.values.get(b, f)))
                .sum();
            assert!(near / total >= 0.9, "{freq} Hz frame {f}: {}", near / total);
        }
    }
}

#[test]
fn filterbank_contract() {
    let fb = GammatoneFilterbank::default();
    assert_eq!((fb.weights.rows(), fb.weights.cols()), (128, 513));
    let c = &fb.center_frequencies;
    assert!(c.windows(2).all(|w| w[0] < w[1]));
    assert!(c[0] > 0.0 && c[127] < 22_050.0);
    assert!(c[0] >= 20.0);
    for (b, &centre) in c.iter().enumerate() {
        let row = fb.weights.row(b);
        assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert!(row.iter().sum::<f32>() > 0.0);
        let argmax = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap();
        let expected = (centre * 1024.0 / 44_100.0).round() as i64;
        assert!((argmax as i64 - expected).abs() <= 1, "band {b}: {argmax} vs {expected}");
        assert_eq!(row[argmax], 1.0);
    }
}

#[test]
fn erb_scale_round_trip() {
    for f in [20.0, 440.0, 1000.0, 22_050.0] {
        assert!((erb_rate_inverse(erb_rate(f)) - f).abs() < 1e-6 * f);
    }
    // ERB-rate spacing is uniform
    let fb = GammatoneFilterbank::default();
    let e: Vec<f64> = fb.center_frequencies.iter().map(|&f| erb_rate(f)).collect();
    let step = e[1] - e[0];
    assert!(e.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-9));
}

#[test]
fn log_gt_examples() {
    let fb = GammatoneFilterbank::default();
    let zero = PowerSpectrogram {
        values: Matrix::zeros(N_BINS, 7),
    };
    let out = log_gt(&zero, &fb).unwrap();
    assert_eq!((out.rows(), out.cols()), (128, 7));
    assert!(out.data().iter().all(|&v| (v + 10.0).abs() < 1e-6));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = PowerSpectrogram {
        values: Matrix::from_fn(N_BINS, 4, |_, _| rng.random_range(1.0..100.0)),
    };
    let mut scaled = spec.clone();
    scaled.values.data_mut().iter_mut().for_each(|v| *v *= 10.0);
    let a = log_gt(&spec, &fb).unwrap();
    let b = log_gt(&scaled, &fb).unwrap();
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((y - x - 1.0).abs() < 1e-5);
    }

    let short = PowerSpectrogram {
        values: Matrix::zeros(100, 3),
    };
    assert!(matches!(log_gt(&short, &fb), Err(Error::Dimension(_))));
}

#[test]
fn log_gt_shape_for_five_seconds() {
    let fe = FeatureExtractor::new();
    let spec = fe.stft().power(&sine(1000.0, 220_500)).unwrap();
    let out = log_gt(&spec, fe.filterbank()).unwrap();
    assert_eq!((out.rows(), out.cols()), (128, 429));
}

#[test]
fn delta_examples() {
    let constant = Matrix::from_fn(3, 9, |r, _| r as f32 * 2.5 - 1.0);
    let d = delta(&constant).unwrap();
    assert_eq!((d.rows(), d.cols()), (3, 9));
    assert!(d.data().iter().all(|&v| v == 0.0));

    let s = 0.75f32;
    let ramp = Matrix::from_fn(2, 12, |_, t| s * t as f32);
    let d = delta(&ramp).unwrap();
    for r in 0..2 {
        for t in 2..10 {
            assert!((d.get(r, t) - s).abs() < 1e-6);
        }
        // replicated edges shrink the slope at the borders
        assert!(d.get(r, 0) < s);
    }

    assert!(matches!(delta(&Matrix::zeros(2, 4)), Err(Error::TooShort(_))));
}

#[test]
fn segment_counts_and_padding() {
    let seg_count = |n: usize| {
        let m = Matrix::from_fn(N_BANDS, n, |b, t| (b + t) as f32);
        segment(&m, &m, "c", 3, 2).unwrap()
    };
    assert_eq!((429 - 128) / 64 + 1, 5);
    assert_eq!(seg_count(429).len(), 5);
    let one = seg_count(128);
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].get(5, 127, 0), (5 + 127) as f32);

    let padded = seg_count(100);
    assert_eq!(padded.len(), 1);
    assert_eq!(padded[0].values.len(), SEGMENT_LEN);
    assert_eq!(padded[0].get(7, 99, 0), (7 + 99) as f32);
    for b in 0..N_BANDS {
        for f in 100..128 {
            assert_eq!(padded[0].get(b, f, 0), 0.0);
            assert_eq!(padded[0].get(b, f, 1), 0.0);
        }
    }
    let segs = seg_count(300);
    assert_eq!(segs[2].get(0, 0, 0), 128.0);
    assert_eq!(segs.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(segs.iter().all(|s| s.label == 3 && s.fold == 2 && !s.is_augmented()));
}

#[test]
fn segment_rejects_mismatched_frames() {
    let a = Matrix::zeros(N_BANDS, 200);
    let b = Matrix::zeros(N_BANDS, 199);
    assert!(matches!(segment(&a, &b, "c", 0, 1), Err(Error::Dimension(_))));
}

#[test]
fn segment_channels_are_static_then_delta() {
    let ramp = Matrix::from_fn(N_BANDS, 200, |_, t| 0.5 * t as f32);
    let d = delta(&ramp).unwrap();
    let segs = segment(&ramp, &d, "ramp", 0, 1).unwrap();
    let s = &segs[1];
    for f in 0..SEGMENT_FRAMES {
        assert_eq!(s.get(10, f, 0), 0.5 * (64 + f) as f32);
        assert!((s.get(10, f, 1) - 0.5).abs() < 1e-6);
    }
}

#[test]
fn normalization_examples() {
    let fe = FeatureExtractor::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let segs: Vec<LogGTSegment> = (0..3)
        .flat_map(|i| {
            let x: Vec<f32> = (0..60_000).map(|_| rng.random_range(-0.5..0.5)).collect();
            let mut c = clip(x);
            c.clip_id = format!("n{i}");
            fe.extract(&c).unwrap()
        })
        .collect();
    let stats = NormStats::compute(&segs).unwrap();
    assert!(stats.std.iter().all(|&s| s > 0.0));
    let normed: Vec<LogGTSegment> = segs.iter().map(|s| stats.applied(s)).collect();
    let again = NormStats::compute(&normed).unwrap();
    for c in 0..CHANNELS {
        assert!(again.mean[c].abs() < 1e-3, "mean {c}: {}", again.mean[c]);
        assert!((again.std[c] - 1.0).abs() < 1e-3, "std {c}: {}", again.std[c]);
    }
    assert_eq!(NormStats::IDENTITY.applied(&segs[0]), segs[0]);

    let mut flat = segs[0].clone();
    flat.values.iter_mut().for_each(|v| *v = 3.0);
    assert!(matches!(NormStats::compute([&flat]), Err(Error::ZeroStd(_))));
    assert!(matches!(NormStats::compute(std::iter::empty()), Err(Error::ZeroStd(_))));
}

#[test]
fn extraction_is_deterministic() {
    let fe = FeatureExtractor::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<f32> = (0..100_000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a = fe.extract(&clip(x.clone())).unwrap();
    let b = FeatureExtractor::new().extract(&clip(x)).unwrap();
    assert_eq!(a.len(), b.len());
    for (s, t) in a.iter().zip(&b) {
        assert!(s.values.iter().zip(&t.values).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn five_second_clip_gives_five_segments() {
    let segs = FeatureExtractor::new().extract(&clip(sine(440.0, 220_500))).unwrap();
    assert_eq!(segs.len(), 5);
    assert!(segs.iter().all(|s| s.values.len() == SEGMENT_LEN));
}
