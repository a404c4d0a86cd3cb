//! Short-time Fourier analysis and weighted overlap-add synthesis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fft::RealFft;
use crate::signals::Waveform;
use crate::{Error, Result};

/// Analysis/synthesis window pair. The same window is used on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    /// Square root of the periodic Hann window.
    SqrtHann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::SqrtHann => (0..len)
                .map(|n| {
                    let hann = 0.5
                        - 0.5 * (std::f64::consts::TAU * n as f64 / len as f64).cos();
                    hann.sqrt()
                })
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt-hann" => Ok(Window::SqrtHann),
            "rectangular" => Ok(Window::Rectangular),
            other => Err(Error::InvalidParameter(format!("unknown window '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    frame_length: usize,
    overlap: f64,
    window: Window,
}

const COLA_TOLERANCE: f64 = 1e-10;

impl StftConfig {
    /// Validates a frame length (power of two), an overlap fraction in
    /// `[0, 1)` giving an integer hop, and the constant-overlap-add property
    /// of the squared window at that hop.
    pub fn new(frame_length: usize, overlap: f64, window: Window) -> Result<Self> {
        if frame_length < 2 || !frame_length.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "frame length {frame_length} is not a power of two"
            )));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidParameter(format!("overlap {overlap} outside [0, 1)")));
        }
        let hop = frame_length as f64 * (1.0 - overlap);
        if hop < 1.0 || (hop - hop.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "hop {hop} for frame {frame_length} and overlap {overlap} is not a positive integer"
            )));
        }
        let cfg = Self {
            frame_length,
            overlap,
            window,
        };
        let sums = cfg.overlap_sums();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let spread = sums.iter().fold(0.0f64, |m, s| m.max((s - mean).abs()));
        if mean <= 0.0 || spread > COLA_TOLERANCE * mean {
            return Err(Error::InvalidParameter(format!(
                "{window:?} window is not overlap-add constant at hop {}",
                cfg.hop()
            )));
        }
        Ok(cfg)
    }

    /// Frame length `K`.
    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn hop(&self) -> usize {
        (self.frame_length as f64 * (1.0 - self.overlap)).round() as usize
    }

    /// Stored bins per frame, `K/2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.frame_length / 2 + 1
    }

    /// Zero padding applied at each signal edge.
    pub fn edge_padding(&self) -> usize {
        self.frame_length - self.hop()
    }

    // Σ_j w²(n + j·hop) for n in one hop period.
    fn overlap_sums(&self) -> Vec<f64> {
        let w = self.window.coefficients(self.frame_length);
        let hop = self.hop();
        (0..hop)
            .map(|n| w.iter().skip(n).step_by(hop).map(|x| x * x).sum())
            .collect()
    }

    fn overlap_gain(&self) -> f64 {
        let sums = self.overlap_sums();
        sums.iter().sum::<f64>() / sums.len() as f64
    }

    pub fn num_frames(&self, signal_len: usize) -> usize {
        let span = signal_len + 2 * self.edge_padding() - self.frame_length;
        span.div_ceil(self.hop()) + 1
    }
}

/// Complex time-frequency matrix over bins `0..=K/2` and frames.
///
/// Stored frame-major: the `num_bins` values of a frame are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<Complex64>,
    num_frames: usize,
    config: StftConfig,
    sample_rate: u32,
    original_length: usize,
}

impl Spectrogram {
    pub fn new(
        values: Vec<Complex64>,
        num_frames: usize,
        config: StftConfig,
        sample_rate: u32,
        original_length: usize,
    ) -> Result<Self> {
        if values.len() != num_frames * config.num_bins() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} frames of {} bins",
                values.len(),
                num_frames,
                config.num_bins()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidSignal("spectrogram has non-finite values".into()));
        }
        Ok(Self {
            values,
            num_frames,
            config,
            sample_rate,
            original_length,
        })
    }

    /// Same shape and metadata as `self`, new values.
    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        Self::new(
            values,
            self.num_frames,
            self.config,
            self.sample_rate,
            self.original_length,
        )
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); self.values.len()],
            ..self.clone()
        }
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn num_bins(&self) -> usize {
        self.config.num_bins()
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.values[frame * self.num_bins() + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let nb = self.num_bins();
        &self.values[frame * nb..(frame + 1) * nb]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.num_frames == other.num_frames && self.config == other.config
    }
}

/// Short-time Fourier transform of `x`.
///
/// The signal is zero-padded by `K − hop` samples at both ends (the tail is
/// extended further to complete the last frame); frame `m` covers samples
/// `[m·hop, m·hop + K)` of the padded signal.
pub fn analyze(x: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    let k = cfg.frame_length();
    if x.len() < k {
        return Err(Error::SignalTooShort {
            len: x.len(),
            frame_length: k,
        });
    }
    let hop = cfg.hop();
    let pad = cfg.edge_padding();
    let num_frames = cfg.num_frames(x.len());
    let mut padded = vec![0.0; (num_frames - 1) * hop + k];
    padded[pad..pad + x.len()].copy_from_slice(x.samples());

    let window = cfg.window().coefficients(k);
    let fft = RealFft::new(k);
    let mut values = Vec::with_capacity(num_frames * cfg.num_bins());
    let mut frame = vec![0.0; k];
    for m in 0..num_frames {
        let seg = &padded[m * hop..m * hop + k];
        for ((f, s), w) in frame.iter_mut().zip(seg).zip(&window) {
            *f = s * w;
        }
        values.extend(fft.forward(&frame));
    }
    Spectrogram::new(values, num_frames, *cfg, x.sample_rate(), x.len())
}

/// Weighted overlap-add inverse of [`analyze`], truncated to the original
/// signal length.
pub fn synthesize(spec: &Spectrogram) -> Result<Waveform> {
    let cfg = spec.config();
    let k = cfg.frame_length();
    let hop = cfg.hop();
    let pad = cfg.edge_padding();
    let total = (spec.num_frames() - 1) * hop + k;
    if pad + spec.original_length() > total {
        return Err(Error::ShapeMismatch(format!(
            "{} frames cannot cover {} samples",
            spec.num_frames(),
            spec.original_length()
        )));
    }
    let window = cfg.window().coefficients(k);
    let fft = RealFft::new(k);
    let mut out = vec![0.0; total];
    for m in 0..spec.num_frames() {
        let frame = fft.inverse(spec.frame(m));
        for (n, (x, w)) in frame.iter().zip(&window).enumerate() {
            out[m * hop + n] += x * w;
        }
    }
    let gain = 1.0 / cfg.overlap_gain();
    let samples = out[pad..pad + spec.original_length()]
        .iter()
        .map(|s| s * gain)
        .collect();
    Waveform::new(samples, spec.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(seed: u64, len: usize, rate: u32) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(), rate).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    // Direct O(K²) DFT used as an independent reference.
    fn direct_bin(frame: &[f64], k: usize) -> Complex64 {
        let n = frame.len() as f64;
        frame
            .iter()
            .enumerate()
            .map(|(t, &x)| Complex64::from_polar(x, -std::f64::consts::TAU * (k * t) as f64 / n))
            .sum()
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::new(2048, 0.75, Window::SqrtHann).is_ok());
        assert!(StftConfig::new(1000, 0.75, Window::SqrtHann).is_err());
        assert!(StftConfig::new(256, 1.0, Window::SqrtHann).is_err());
        assert!(StftConfig::new(256, 0.3, Window::SqrtHann).is_err());
        // sqrt-Hann squared is not overlap-add constant without overlap
        assert!(StftConfig::new(256, 0.0, Window::SqrtHann).is_err());
        assert!(StftConfig::new(256, 0.0, Window::Rectangular).is_ok());
        assert_eq!(StftConfig::new(2048, 0.75, Window::SqrtHann).unwrap().hop(), 512);
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram_and_back() {
        let cfg = StftConfig::new(256, 0.75, Window::SqrtHann).unwrap();
        let x = Waveform::zeros(1000, 8000).unwrap();
        let s = analyze(&x, &cfg).unwrap();
        assert!(s.values().iter().all(|v| v.norm() == 0.0));
        let y = synthesize(&s.zeros_like()).unwrap();
        assert_eq!(y.len(), 1000);
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn short_signal_is_rejected() {
        let cfg = StftConfig::new(256, 0.5, Window::SqrtHann).unwrap();
        let x = Waveform::zeros(255, 8000).unwrap();
        assert!(matches!(analyze(&x, &cfg), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn bin_centred_cosine_concentrates_in_one_bin() {
        let k = 256;
        let k0 = 13;
        let cfg = StftConfig::new(k, 0.5, Window::Rectangular).unwrap();
        let x: Vec<f64> = (0..4 * k)
            .map(|n| (std::f64::consts::TAU * (k0 * n) as f64 / k as f64).cos())
            .collect();
        let x = Waveform::new(x, 8000).unwrap();
        let s = analyze(&x, &cfg).unwrap();
        let pad = cfg.edge_padding();
        let hop = cfg.hop();
        for m in 0..s.num_frames() {
            // interior frames lie entirely inside the signal
            if m * hop < pad || m * hop + k > pad + x.len() {
                continue;
            }
            let start = m * hop - pad;
            let frame = &x.samples()[start..start + k];
            let total: f64 = (0..k).map(|b| direct_bin(frame, b).norm_sqr()).sum();
            let at_k0 = 2.0 * direct_bin(frame, k0).norm_sqr();
            assert!(at_k0 / total >= 0.99);
            assert!((s.get(k0, m) - direct_bin(frame, k0)).norm() < 1e-9);
        }
    }

    #[test]
    fn delta_at_start_reproduces_window() {
        let cfg = StftConfig::new(64, 0.75, Window::SqrtHann).unwrap();
        let mut x = vec![0.0; 256];
        x[0] = 1.0;
        let s = analyze(&Waveform::new(x, 8000).unwrap(), &cfg).unwrap();
        // sample 0 sits at padded index K − hop of frame 0
        let w = Window::SqrtHann.coefficients(64);
        let expected = w[cfg.edge_padding()];
        for b in 0..s.num_bins() {
            assert!((s.get(b, 0).norm() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_linearity() {
        let cfg = StftConfig::new(1024, 0.75, Window::SqrtHann).unwrap();
        let x = random_wave(3, 10_000, 10_000);
        let s = analyze(&x, &cfg).unwrap();
        let y = synthesize(&s).unwrap();
        assert!(rel_err(y.samples(), x.samples()) <= 1e-6);

        let halved = s.with_values(s.values().iter().map(|v| v * 0.5).collect()).unwrap();
        let y = synthesize(&halved).unwrap();
        let want: Vec<f64> = x.samples().iter().map(|v| 0.5 * v).collect();
        assert!(rel_err(y.samples(), &want) <= 1e-6);
    }

    #[test]
    fn parseval_per_frame() {
        let cfg = StftConfig::new(256, 0.5, Window::SqrtHann).unwrap();
        let x = random_wave(5, 2000, 8000);
        let s = analyze(&x, &cfg).unwrap();
        let w = Window::SqrtHann.coefficients(256);
        let pad = cfg.edge_padding();
        let mut padded = vec![0.0; pad];
        padded.extend_from_slice(x.samples());
        padded.resize((s.num_frames() - 1) * cfg.hop() + 256, 0.0);
        for m in 0..s.num_frames() {
            let seg = &padded[m * cfg.hop()..m * cfg.hop() + 256];
            let time: f64 = seg.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum();
            let fr = s.frame(m);
            let nb = fr.len();
            let spec: f64 = fr
                .iter()
                .enumerate()
                .map(|(b, v)| if b == 0 || b == nb - 1 { v.norm_sqr() } else { 2.0 * v.norm_sqr() })
                .sum();
            assert!((time - spec / 256.0).abs() <= 1e-9 * time.max(1e-300));
        }
    }
}
