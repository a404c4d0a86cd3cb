mod common;

use cbss::mask::{apply_mask, estimate_binary_masks, isolated_unit_fraction, MaskKind, MaskThreshold, SpectralMask};
use cbss::signals::{gen_am_source, read_wav, write_wav, MultichannelRecording, WavEncoding, Waveform};
use cbss::stft::{analyze, synthesize, StftConfig, Window};
use proptest::prelude::*;

fn recording(channels: Vec<Vec<f64>>, rate: u32) -> MultichannelRecording {
    MultichannelRecording::new(channels.into_iter().map(|c| Waveform::new(c, rate).unwrap()).collect()).unwrap()
}

fn samples_strategy() -> impl Strategy<Value = (usize, Vec<Vec<f32>>)> {
    (1usize..=2, 1usize..400).prop_flat_map(|(ch, n)| {
        (Just(ch), prop::collection::vec(prop::collection::vec(-1.5f32..1.5, n), ch))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wav_round_trip((_, chans) in samples_strategy(), rate in 1000u32..48_000) {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<Vec<f64>> = chans.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        let rec = recording(data.clone(), rate);

        let f32_path = dir.path().join("f.wav");
        write_wav(&rec, &f32_path, WavEncoding::Float32).unwrap();
        let back = read_wav(&f32_path).unwrap();
        prop_assert_eq!(back.sample_rate(), rate);
        for (a, b) in back.channels().iter().zip(rec.channels()) {
            prop_assert_eq!(a.samples(), b.samples());
        }

        let pcm_path = dir.path().join("p.wav");
        write_wav(&rec, &pcm_path, WavEncoding::Pcm16).unwrap();
        let back = read_wav(&pcm_path).unwrap();
        for (a, b) in back.channels().iter().zip(&data) {
            for (x, y) in a.samples().iter().zip(b) {
                prop_assert!((x - y.clamp(-1.0, 1.0)).abs() <= 1.0 / 32768.0 + 1e-12);
            }
        }
    }

    #[test]
    fn stft_round_trip_and_linearity(
        seed in any::<u64>(),
        log_k in 5usize..10,
        half_overlap in any::<bool>(),
        extra in 0usize..3000,
        a in -2.0f64..2.0,
    ) {
        let k = 1 << log_k;
        let cfg = StftConfig::new(k, if half_overlap { 0.5 } else { 0.75 }, Window::SqrtHann).unwrap();
        let mut rng = common::rng(seed);
        let n = k + extra;
        let x = common::white_noise(&mut rng, n, 8000);
        let y = common::white_noise(&mut rng, n, 8000);
        let back = synthesize(&analyze(&x, &cfg).unwrap()).unwrap();
        prop_assert_eq!(back.len(), n);
        prop_assert!(common::rel_l2(back.samples(), x.samples()) <= 1e-6);

        let combo = Waveform::new(x.samples().iter().zip(y.samples()).map(|(p, q)| a * p + q).collect(), 8000).unwrap();
        let sx = analyze(&x, &cfg).unwrap();
        let sy = analyze(&y, &cfg).unwrap();
        let sc = analyze(&combo, &cfg).unwrap();
        for ((c, p), q) in sc.values().iter().zip(sx.values()).zip(sy.values()) {
            prop_assert!((c - (p * a + q)).norm() < 1e-9);
        }
    }

    #[test]
    fn binary_masks_are_disjoint_and_idempotent(seed in any::<u64>(), tau in 0.2f64..5.0) {
        let cfg = StftConfig::new(64, 0.75, Window::SqrtHann).unwrap();
        let mut rng = common::rng(seed);
        let s1 = analyze(&common::white_noise(&mut rng, 600, 8000), &cfg).unwrap();
        let s2 = analyze(&common::white_noise(&mut rng, 600, 8000), &cfg).unwrap();
        let (m1, m2) = estimate_binary_masks(&s1, &s2, MaskThreshold::new(tau).unwrap()).unwrap();
        // τ ≥ 1 makes the masks disjoint; τ < 1 makes them cover every unit
        for (a, b) in m1.values().iter().zip(m2.values()) {
            if tau >= 1.0 {
                prop_assert!(a * b == 0.0);
            } else {
                prop_assert!(a + b >= 1.0);
            }
        }
        let once = apply_mask(&m1, &s1).unwrap();
        let twice = apply_mask(&m1, &once).unwrap();
        prop_assert_eq!(once.values(), twice.values());
        let f = isolated_unit_fraction(&m1);
        prop_assert!((0.0..=1.0).contains(&f));
    }
}

#[test]
fn stft_round_trip_over_table_of_configs() {
    let mut rng = common::rng(42);
    for k in [256, 1024, 2048] {
        for overlap in [0.5, 0.75] {
            for window in [Window::SqrtHann, Window::Rectangular] {
                let cfg = StftConfig::new(k, overlap, window).unwrap();
                let x = common::white_noise(&mut rng, 3 * k + 17, 10_000);
                let back = synthesize(&analyze(&x, &cfg).unwrap()).unwrap();
                assert!(common::rel_l2(back.samples(), x.samples()) <= 1e-6);
            }
        }
    }
}

#[test]
fn am_sources_are_uncorrelated_and_non_stationary() {
    let a = gen_am_source(1, 5.0, 10_000, 1.0).unwrap();
    let b = gen_am_source(2, 5.0, 10_000, 1.0).unwrap();
    assert_eq!(a.len(), 50_000);
    let dot: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| x * y).sum();
    let rho = dot / (a.energy() * b.energy()).sqrt();
    assert!(rho.abs() < 0.1, "rho {rho}");

    let peak = a.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!((peak - 0.9).abs() < 1e-12);

    let win = 640;
    let powers: Vec<f64> = a
        .samples()
        .chunks_exact(win)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>() / win as f64)
        .collect();
    let max = powers.iter().cloned().fold(f64::MIN, f64::max);
    let min = powers.iter().cloned().fold(f64::MAX, f64::min);
    assert!(10.0 * (max / min).log10() >= 6.0);
}

#[test]
fn smoothed_mask_values_are_not_forced_binary() {
    let m = SpectralMask::new(vec![0.2, 0.7, 1.0, 0.001], 2, 2, MaskKind::Smoothed).unwrap();
    assert_eq!(m.binarized().values(), &[0.0, 1.0, 1.0, 0.0]);
    assert!(SpectralMask::new(vec![0.2, 0.7, 1.0, 0.0], 2, 2, MaskKind::Binary).is_err());
}
