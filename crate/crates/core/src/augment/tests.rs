use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dsp::{stft_power, SAMPLE_RATE};
use crate::error::Error;

fn tone(freq: f64, n: usize) -> WaveClip {
    let samples = (0..n)
        .map(|i| (0.8 * (2.0 * PI * freq * i as f64 / f64::from(SAMPLE_RATE)).sin()) as f32)
        .collect();
    WaveClip::new("tone", samples, SAMPLE_RATE, 0, 1)
}

/// Most common per-frame argmax bin of the analysis STFT.
fn dominant_bin(clip: &WaveClip) -> usize {
    let spec = stft_power(clip).unwrap();
    let mut votes = vec![0usize; spec.n_bins()];
    for f in 0..spec.n_frames() {
        votes[spec.argmax_bin(f)] += 1;
    }
    (0..votes.len()).max_by_key(|&b| votes[b]).unwrap()
}

/// Frequency of the strongest component, by scanning a Hann-windowed DFT of
/// the middle half of the signal on a 0.25 Hz grid.
fn dominant_freq(x: &[f32], lo: f64, hi: f64) -> f64 {
    let mid = &x[x.len() / 4..3 * x.len() / 4];
    let n = mid.len();
    let sr = f64::from(SAMPLE_RATE);
    let mut best = (0.0, lo);
    let mut f = lo;
    while f <= hi {
        let (mut re, mut im) = (0.0, 0.0);
        let w = 2.0 * PI * f / sr;
        for (i, &s) in mid.iter().enumerate() {
            let win = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            let v = f64::from(s) * win;
            re += v * (w * i as f64).cos();
            im -= v * (w * i as f64).sin();
        }
        let p = re * re + im * im;
        if p > best.0 {
            best = (p, f);
        }
        f += 0.25;
    }
    best.1
}

#[test]
fn unit_rate_keeps_length() {
    let c = tone(440.0, 44_100);
    let out = time_stretch(&c, 1.0).unwrap();
    let rel = (out.len() as f64 - c.len() as f64).abs() / c.len() as f64;
    assert!(rel <= 0.01);
    // and reconstructs the interior closely
    let err: f64 = c.samples[4096..40_000]
        .iter()
        .zip(&out.samples[4096..40_000])
        .map(|(a, b)| f64::from(a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "max reconstruction error {err}");
}

#[test]
fn fast_rate_shortens_five_second_clip() {
    let c = tone(440.0, 220_500);
    let out = time_stretch(&c, 1.3).unwrap();
    let target: f64 = 220_500.0 / 1.3;
    assert_eq!(target.round(), 169_615.0);
    assert!((out.len() as f64 - target).abs() / target <= 0.02);
}

#[test]
fn stretch_preserves_pitch() {
    let c = tone(440.0, 44_100);
    let out = time_stretch(&c, 0.8).unwrap();
    assert_eq!(dominant_bin(&c), 10);
    assert_eq!(dominant_bin(&out), 10);
    let f = dominant_freq(&out.samples, 400.0, 480.0);
    assert!((f - 440.0).abs() / 440.0 < 0.02, "{f}");
}

#[test]
fn stretch_rejects_non_positive_rate() {
    let c = tone(440.0, 4096);
    assert!(matches!(time_stretch(&c, 0.0), Err(Error::Contract(_))));
    assert!(matches!(time_stretch(&c, -1.0), Err(Error::Contract(_))));
}

#[test]
fn stretch_duration_law_over_range() {
    let c = tone(700.0, 50_000);
    for rate in [0.8, 0.9, 1.0, 1.1, 1.2, 1.3] {
        let out = time_stretch(&c, rate).unwrap();
        let target = c.len() as f64 / rate;
        assert!((out.len() as f64 - target).abs() / target <= 0.02, "rate {rate}");
    }
}

#[test]
fn zero_shift_keeps_peak() {
    let c = tone(440.0, 44_100);
    let out = pitch_shift(&c, 0.0).unwrap();
    assert_eq!(dominant_bin(&out), 10);
}

#[test]
fn up_shift_moves_peak() {
    let c = tone(440.0, 44_100);
    let out = pitch_shift(&c, 3.5).unwrap();
    let expected = 440.0 * 2f64.powf(3.5 / 12.0);
    assert!((expected - 538.6).abs() < 0.05);
    let bin_hz = f64::from(SAMPLE_RATE) / 1024.0;
    let bin = dominant_bin(&out);
    assert!((bin as f64 * bin_hz - expected).abs() <= bin_hz, "bin {bin}");
    assert!(bin == 12 || bin == 13);
    let f = dominant_freq(&out.samples, 480.0, 600.0);
    assert!((f / 440.0 / 2f64.powf(3.5 / 12.0) - 1.0).abs() < 0.02, "{f}");
}

#[test]
fn pitch_shift_frequency_and_length_law() {
    for (freq, steps) in [(300.0, -3.5), (500.0, -1.25), (440.0, 2.0), (1000.0, 3.0)] {
        let c = tone(freq, 30_000);
        let out = pitch_shift(&c, steps).unwrap();
        assert!((out.len() as f64 - c.len() as f64).abs() / c.len() as f64 <= 0.01);
        let expected = freq * 2f64.powf(steps / 12.0);
        let f = dominant_freq(&out.samples, expected * 0.9, expected * 1.1);
        assert!((f / freq / 2f64.powf(steps / 12.0) - 1.0).abs() < 0.02, "{freq} {steps}: {f}");
    }
}

#[test]
fn pitch_shift_range_is_checked() {
    let c = tone(440.0, 4096);
    assert!(matches!(pitch_shift(&c, 3.6), Err(Error::Contract(_))));
    assert!(matches!(pitch_shift(&c, -4.0), Err(Error::Contract(_))));
}

#[test]
fn augment_clip_is_deterministic_per_clip() {
    let cfg = AugmentConfig {
        rng_seed: 7,
        ..AugmentConfig::default()
    };
    let c = tone(440.0, 30_000);
    let a = augment_clip(&c, &cfg).unwrap();
    let b = augment_clip(&c, &cfg).unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
    // copy 0 stretched (length changes), copy 1 shifted (length kept)
    assert!((a[1].len() as f64 - c.len() as f64).abs() <= 1.0);
    let r = c.len() as f64 / a[0].len() as f64;
    assert!((0.79..=1.31).contains(&r));
    assert!(augment_clip(&c, &AugmentConfig::disabled()).unwrap().is_empty());
}

#[test]
fn config_validation() {
    assert!(AugmentConfig::default().validate().is_ok());
    let bad = AugmentConfig {
        mixup_alpha: 0.0,
        ..AugmentConfig::default()
    };
    assert!(bad.validate().is_err());
    let bad = AugmentConfig {
        shift_range_semitones: (-5.0, 1.0),
        ..AugmentConfig::default()
    };
    assert!(bad.validate().is_err());
}

// ----- mixup -----

fn onehot(k: usize, n: usize) -> Vec<f32> {
    (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
}

#[test]
fn mixup_endpoints_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let xi: Vec<f32> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut xj: Vec<f32> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
    xj[0] = -0.0;
    let (yi, yj) = (onehot(1, 4), onehot(3, 4));
    let (x, y) = mixup(&xi, &yi, &xj, &yj, 1.0).unwrap();
    assert!(x.iter().zip(&xi).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(y, yi);
    let (x, y) = mixup(&xi, &yi, &xj, &yj, 0.0).unwrap();
    assert!(x.iter().zip(&xj).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert_eq!(y, yj);
}

#[test]
fn mixup_half_labels() {
    let x = vec![1.0f32; 8];
    let (_, y) = mixup(&x, &onehot(2, 10), &x, &onehot(7, 10), 0.5).unwrap();
    for (k, &v) in y.iter().enumerate() {
        let expected = if k == 2 || k == 7 { 0.5 } else { 0.0 };
        assert_eq!(v, expected);
    }
}

#[test]
fn mixup_errors() {
    let y = onehot(0, 2);
    assert!(matches!(mixup(&[1.0; 3], &y, &[1.0; 4], &y, 0.5), Err(Error::Dimension(_))));
    assert!(matches!(mixup(&[1.0; 3], &y, &[1.0; 3], &y, 1.5), Err(Error::Contract(_))));
}

#[test]
fn lambda_mean_is_one_half() {
    for alpha in [0.2, 1.0, 4.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_lambda(alpha, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "alpha {alpha}: {mean}");
    }
}

/// One-sample Kolmogorov–Smirnov statistic against Uniform[0, 1].
fn ks_uniform(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn lambda_with_unit_alpha_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_lambda(1.0, &mut rng).unwrap()).collect();
    let d = ks_uniform(xs);
    assert!(d < 0.01, "KS statistic {d}");
}

#[test]
fn lambda_is_reproducible_and_checked() {
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..20).map(|_| sample_lambda(0.2, &mut rng).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(draw(11), draw(11));
    assert_ne!(draw(11), draw(12));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(sample_lambda(0.0, &mut rng), Err(Error::Contract(_))));
    assert!(matches!(sample_lambda(-1.0, &mut rng), Err(Error::Contract(_))));
}

#[test]
fn pairs_stay_inside_the_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs = draw_pairs(13, 0.2, &mut rng).unwrap();
    assert_eq!(pairs.len(), 13);
    for (k, p) in pairs.iter().enumerate() {
        assert_eq!(p.i, k);
        assert!(p.j < 13);
        assert!((0.0..=1.0).contains(&p.lambda));
    }
}

proptest! {
    #[test]
    fn mixup_is_convex(
        xs in proptest::collection::vec((-100.0f32..100.0, -100.0f32..100.0), 1..64),
        lambda in 0.0f64..=1.0,
        ki in 0usize..5, kj in 0usize..5,
    ) {
        let xi: Vec<f32> = xs.iter().map(|p| p.0).collect();
        let xj: Vec<f32> = xs.iter().map(|p| p.1).collect();
        let (x, y) = mixup(&xi, &onehot(ki, 5), &xj, &onehot(kj, 5), lambda).unwrap();
        for ((&v, &a), &b) in x.iter().zip(&xi).zip(&xj) {
            prop_assert!(a.min(b) <= v && v <= a.max(b));
        }
        let s: f64 = y.iter().map(|&v| f64::from(v)).sum();
        prop_assert!((s - 1.0).abs() < 1e-6);
        prop_assert!(y.iter().all(|&v| v >= 0.0));
    }
}
