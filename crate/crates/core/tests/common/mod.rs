#![allow(dead_code)]

use std::f64::consts::PI;

use cbss::signals::{MultichannelRecording, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise(rng: &mut ChaCha8Rng, len: usize, sample_rate: u32) -> Waveform {
    let samples = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.3).collect();
    Waveform::new(samples, sample_rate).unwrap()
}

/// `x_j = Σ_i h[j][i]·s_i` with scalar gains.
pub fn instantaneous_mix(h: [[f64; 2]; 2], s: [&Waveform; 2]) -> MultichannelRecording {
    let ch = |j: usize| {
        let v = s[0]
            .samples()
            .iter()
            .zip(s[1].samples())
            .map(|(a, b)| h[j][0] * a + h[j][1] * b)
            .collect();
        Waveform::new(v, s[0].sample_rate()).unwrap()
    };
    MultichannelRecording::new(vec![ch(0), ch(1)]).unwrap()
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Parameters of the straight-line smoothing reference.
#[derive(Debug, Clone, Copy)]
pub struct RefParams {
    pub k: usize,
    pub eps: f64,
    pub beta_env: f64,
    pub beta_pitch: f64,
    pub beta_peak: f64,
    pub l_env: usize,
    pub l_low: usize,
    pub l_high: usize,
}

/// Real cepstrum by direct cosine sums from a half spectrum of magnitudes.
pub fn ref_cepstrum(half: &[f64], p: &RefParams) -> Vec<f64> {
    let k = p.k;
    let log_full: Vec<f64> = (0..k).map(|b| half[b.min(k - b)].max(p.eps).ln()).collect();
    (0..k)
        .map(|l| {
            log_full
                .iter()
                .enumerate()
                .map(|(b, v)| v * (2.0 * PI * (b * l % k) as f64 / k as f64).cos())
                .sum::<f64>()
                / k as f64
        })
        .collect()
}

pub fn ref_pitch(c: &[f64], p: &RefParams) -> usize {
    let mut best = p.l_low;
    for l in p.l_low..=p.l_high {
        if c[l] > c[best] {
            best = l;
        }
    }
    best
}

/// Smooths a mask given column-wise (`mask[m][bin]`) using per-frame
/// signal magnitudes `signal[m][bin]`; returns the smoothed columns.
pub fn ref_smooth(mask: &[Vec<f64>], signal: &[Vec<f64>], p: &RefParams) -> Vec<Vec<f64>> {
    let k = p.k;
    let mut prev: Option<Vec<f64>> = None;
    let mut out = Vec::new();
    for (col, sig) in mask.iter().zip(signal) {
        let c = ref_cepstrum(col, p);
        let l_pitch = ref_pitch(&ref_cepstrum(sig, p), p);
        let smoothed: Vec<f64> = match &prev {
            None => c,
            Some(pc) => (0..k)
                .map(|l| {
                    let q = l.min(k - l);
                    let beta = if q <= p.l_env {
                        p.beta_env
                    } else if q == l_pitch {
                        p.beta_pitch
                    } else {
                        p.beta_peak
                    };
                    beta * pc[l] + (1.0 - beta) * c[l]
                })
                .collect(),
        };
        let column = (0..=k / 2)
            .map(|b| {
                let re: f64 = smoothed
                    .iter()
                    .enumerate()
                    .map(|(l, v)| v * (2.0 * PI * (b * l % k) as f64 / k as f64).cos())
                    .sum();
                re.exp().clamp(p.eps, 1.0)
            })
            .collect();
        out.push(column);
        prev = Some(smoothed);
    }
    out
}
