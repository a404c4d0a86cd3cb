mod common;

use cbss::bsseval::{project_decompose, segment_sir, sir_db, ProjectionBasis, SegmentAnnotation, SIR_CAP_DB};
use cbss::signals::Waveform;

#[test]
fn orthogonal_equal_power_mixture_is_zero_db() {
    let mut rng = common::rng(17);
    let n = 100_000;
    let r1 = common::white_noise(&mut rng, n, 10_000);
    let r2 = common::white_noise(&mut rng, n, 10_000);
    let r2 = r2.scaled((r1.energy() / r2.energy()).sqrt()).unwrap();
    let est = Waveform::new(r1.samples().iter().zip(r2.samples()).map(|(a, b)| a + b).collect(), 10_000).unwrap();
    let d = project_decompose(&est, [&r1, &r2], 0, 32).unwrap();
    assert!(sir_db(&d).abs() <= 0.5, "{}", sir_db(&d));
}

#[test]
fn single_tap_projection_uses_inner_products() {
    // orthonormal references: coefficients are plain inner products
    let n = 8;
    let mut e1 = vec![0.0; n];
    let mut e2 = vec![0.0; n];
    e1[2] = 1.0;
    e2[5] = 1.0;
    let r1 = Waveform::new(e1, 8000).unwrap();
    let r2 = Waveform::new(e2, 8000).unwrap();
    let est = Waveform::new(vec![0.1, 0.0, 3.0, 0.0, 0.0, -2.0, 0.0, 0.5], 8000).unwrap();
    let d = project_decompose(&est, [&r1, &r2], 0, 1).unwrap();
    let t = d.s_target.samples();
    let i = d.e_interf.samples();
    let a = d.e_artif.samples();
    assert!((t[2] - 3.0).abs() < 1e-12 && t.iter().map(|v| v.abs()).sum::<f64>() - 3.0 < 1e-12);
    assert!((i[5] + 2.0).abs() < 1e-12);
    assert!((a[0] - 0.1).abs() < 1e-12 && (a[7] - 0.5).abs() < 1e-12);
    assert!((sir_db(&d) - 10.0 * (9.0f64 / 4.0).log10()).abs() < 1e-9);
}

#[test]
fn decomposition_reconstructs_estimate_and_ignores_scale() {
    let mut rng = common::rng(23);
    let r1 = common::white_noise(&mut rng, 3000, 8000);
    let r2 = common::white_noise(&mut rng, 3000, 8000);
    let junk = common::white_noise(&mut rng, 3000, 8000);
    let est = Waveform::new(
        (0..3000)
            .map(|n| r1.samples()[n] + 0.3 * r2.samples()[n.saturating_sub(3)] + 0.05 * junk.samples()[n])
            .collect(),
        8000,
    )
    .unwrap();
    let basis = ProjectionBasis::new([&r1, &r2], 16).unwrap();
    let d = basis.decompose(&est, 0).unwrap();
    let padded = est.resized(d.s_target.len());
    let rebuilt: Vec<f64> = (0..padded.len())
        .map(|n| d.s_target.samples()[n] + d.e_interf.samples()[n] + d.e_artif.samples()[n])
        .collect();
    assert!(common::rel_l2(&rebuilt, padded.samples()) < 1e-10);

    let scaled = basis.decompose(&est.scaled(0.37).unwrap(), 0).unwrap();
    assert!((sir_db(&d) - sir_db(&scaled)).abs() < 1e-9);
    let pair = basis.evaluate_pair([&est, &r2]).unwrap();
    assert!(!pair.swapped);
    let crossed = basis.evaluate_pair([&r2, &est]).unwrap();
    assert!(crossed.swapped);
    assert_eq!(crossed.outputs[0].sir_db, SIR_CAP_DB);
}

#[test]
fn segment_powers_give_closed_form_sir() {
    let n = 400;
    let seg = SegmentAnnotation::parse("0:100, 200:300").unwrap();
    let mk = |p1: f64, p2: f64| {
        Waveform::new(
            (0..n)
                .map(|i| match i {
                    0..=99 => p1.sqrt() * if i % 2 == 0 { 1.0 } else { -1.0 },
                    200..=299 => p2.sqrt(),
                    _ => 0.0,
                })
                .collect(),
            8000,
        )
        .unwrap()
    };
    let (a, b) = segment_sir([&mk(4.0, 1.0), &mk(1.0, 9.0)], &seg).unwrap();
    assert!((a - 10.0 * 4f64.log10()).abs() < 1e-9);
    assert!((b - 10.0 * 9f64.log10()).abs() < 1e-9);
    assert!(SegmentAnnotation::parse("0:100,50:150").is_err());
    assert!(SegmentAnnotation::parse("0:100").is_err());
    assert!(segment_sir([&mk(1.0, 1.0), &mk(1.0, 1.0)], &SegmentAnnotation::parse("0:10,390:401").unwrap()).is_err());
}
