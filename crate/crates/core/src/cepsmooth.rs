//! Temporal smoothing of spectral masks in the cepstral domain.
//!
//! Each mask column is floored, log-transformed and taken to the cepstral
//! domain. There a first-order recursion over frames smooths every quefrency
//! with its own constant: little smoothing on the low-quefrency envelope
//! band and on the current pitch quefrency, strong smoothing elsewhere,
//! where isolated mask peaks live. The result is exponentiated back into a
//! spectral mask.

use num_complex::Complex64;
use serde::Serialize;

use crate::fft::RealFft;
use crate::mask::{MaskKind, SpectralMask};
use crate::stft::Spectrogram;
use crate::{Error, Result};

/// Where to search for the pitch quefrency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "unit", rename_all = "lowercase")]
pub enum PitchRange {
    /// Literal quefrency bins `low..=high`.
    Bins { low: usize, high: usize },
    /// Fundamental frequencies in Hz, mapped to `round(fs / f)`.
    Hz { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingParams {
    pub beta_env: f64,
    pub beta_pitch: f64,
    pub beta_peak: f64,
    /// Last quefrency of the envelope band.
    pub l_env: usize,
    pub pitch_range: PitchRange,
    /// Mask floor ε applied before the logarithm and to the output.
    pub mask_floor: f64,
    pub dft_length: usize,
}

impl SmoothingParams {
    /// β = (0, 0.4, 0.9) for envelope, pitch and remaining quefrencies;
    /// envelope band up to quefrency 8; pitch searched in bins 16..=120;
    /// floor 1e-3.
    pub fn defaults_for(dft_length: usize) -> Self {
        Self {
            beta_env: 0.0,
            beta_pitch: 0.4,
            beta_peak: 0.9,
            l_env: 8,
            pitch_range: PitchRange::Bins { low: 16, high: 120 },
            mask_floor: 1e-3,
            dft_length,
        }
    }

    /// Resolves the pitch search range to quefrency bins and checks
    /// `0 < l_env < l_low < l_high < K/2` along with the β and ε ranges.
    pub fn pitch_bins(&self, sample_rate: u32) -> Result<(usize, usize)> {
        for (name, b) in [
            ("beta_env", self.beta_env),
            ("beta_pitch", self.beta_pitch),
            ("beta_peak", self.beta_peak),
        ] {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidParameter(format!("{name} = {b} outside [0, 1]")));
            }
        }
        if !(self.mask_floor > 0.0 && self.mask_floor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mask floor {} outside (0, 1)",
                self.mask_floor
            )));
        }
        let (low, high) = match self.pitch_range {
            PitchRange::Bins { low, high } => (low, high),
            PitchRange::Hz { min, max } => {
                if !(min > 0.0 && max > min) {
                    return Err(Error::InvalidParameter(format!(
                        "pitch range {min}..{max} Hz is not a positive interval"
                    )));
                }
                let fs = sample_rate as f64;
                ((fs / max).round() as usize, (fs / min).round() as usize)
            }
        };
        if !(0 < self.l_env && self.l_env < low && low < high && high < self.dft_length / 2) {
            return Err(Error::InvalidParameter(format!(
                "quefrency bounds must satisfy 0 < l_env ({}) < l_low ({low}) < l_high ({high}) < K/2 ({})",
                self.l_env,
                self.dft_length / 2
            )));
        }
        Ok((low, high))
    }
}

/// Real cepstrum of one frame, length `K`, even about quefrency 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CepstralFrame {
    coefficients: Vec<f64>,
    frame: usize,
}

impl CepstralFrame {
    pub fn new(coefficients: Vec<f64>, frame: usize) -> Self {
        Self {
            coefficients,
            frame,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Largest `|c(l) − c(K−l)|` over `l ≥ 1`.
    pub fn asymmetry(&self) -> f64 {
        let k = self.coefficients.len();
        (1..k)
            .map(|l| (self.coefficients[l] - self.coefficients[k - l]).abs())
            .fold(0.0, f64::max)
    }
}

/// β for quefrency `l`, following the envelope / pitch / peak schedule.
/// `l` and `K − l` always receive the same constant.
pub fn beta_for_quefrency(l: usize, l_pitch: usize, params: &SmoothingParams) -> f64 {
    let k = params.dft_length;
    let folded = l.min(k - l);
    if folded <= params.l_env {
        params.beta_env
    } else if folded == l_pitch {
        params.beta_pitch
    } else {
        params.beta_peak
    }
}

/// Quefrency in `l_low..=l_high` where the cepstrum peaks; the smallest
/// such quefrency wins ties.
pub fn estimate_pitch_quefrency(cepstrum: &CepstralFrame, l_low: usize, l_high: usize) -> usize {
    let c = cepstrum.coefficients();
    let mut best = l_low;
    for l in l_low..=l_high {
        if c[l] > c[best] {
            best = l;
        }
    }
    best
}

/// Per-quefrency convex combination `β_l·prev + (1 − β_l)·current`.
pub fn smooth_step(
    prev: &CepstralFrame,
    current: &CepstralFrame,
    l_pitch: usize,
    params: &SmoothingParams,
) -> Result<CepstralFrame> {
    if prev.len() != current.len() || current.len() != params.dft_length {
        return Err(Error::ShapeMismatch(format!(
            "cepstral frames of length {} and {} for K = {}",
            prev.len(),
            current.len(),
            params.dft_length
        )));
    }
    let coefficients = prev
        .coefficients()
        .iter()
        .zip(current.coefficients())
        .enumerate()
        .map(|(l, (p, c))| {
            let beta = beta_for_quefrency(l, l_pitch, params);
            beta * p + (1.0 - beta) * c
        })
        .collect();
    Ok(CepstralFrame::new(coefficients, current.frame()))
}

/// Transforms between mask columns and cepstra for one parameter set.
#[derive(Debug, Clone)]
pub struct CepstralSmoother {
    params: SmoothingParams,
    fft: RealFft,
    l_low: usize,
    l_high: usize,
}

impl CepstralSmoother {
    pub fn new(params: SmoothingParams, sample_rate: u32) -> Result<Self> {
        let (l_low, l_high) = params.pitch_bins(sample_rate)?;
        Ok(Self {
            params,
            fft: RealFft::new(params.dft_length),
            l_low,
            l_high,
        })
    }

    pub fn params(&self) -> &SmoothingParams {
        &self.params
    }

    pub fn pitch_bins(&self) -> (usize, usize) {
        (self.l_low, self.l_high)
    }

    // Inverse DFT of the even extension of ln(max(v, ε)).
    fn log_cepstrum(&self, half: impl Iterator<Item = f64>, frame: usize) -> CepstralFrame {
        let eps = self.params.mask_floor;
        let logs: Vec<Complex64> = half.map(|v| Complex64::new(v.max(eps).ln(), 0.0)).collect();
        CepstralFrame::new(self.fft.inverse(&logs), frame)
    }

    /// Cepstrum of a mask column of `K/2 + 1` values.
    pub fn mask_frame_to_cepstrum(&self, column: &[f64], frame: usize) -> Result<CepstralFrame> {
        self.check_column(column.len())?;
        Ok(self.log_cepstrum(column.iter().copied(), frame))
    }

    /// Real cepstrum of a spectrogram frame, magnitudes floored at ε.
    pub fn signal_cepstrum(&self, spectrum: &[Complex64], frame: usize) -> Result<CepstralFrame> {
        self.check_column(spectrum.len())?;
        Ok(self.log_cepstrum(spectrum.iter().map(|v| v.norm()), frame))
    }

    /// `exp(DFT{c})`, clamped to `[ε, 1]`, bins `0..=K/2`.
    pub fn cepstrum_to_mask(&self, cepstrum: &CepstralFrame) -> Result<Vec<f64>> {
        if cepstrum.len() != self.params.dft_length {
            return Err(Error::ShapeMismatch(format!(
                "cepstrum of length {} for K = {}",
                cepstrum.len(),
                self.params.dft_length
            )));
        }
        let eps = self.params.mask_floor;
        Ok(self
            .fft
            .forward(cepstrum.coefficients())
            .iter()
            .map(|v| v.re.exp().clamp(eps, 1.0))
            .collect())
    }

    pub fn pitch_quefrency(&self, signal_cepstrum: &CepstralFrame) -> usize {
        estimate_pitch_quefrency(signal_cepstrum, self.l_low, self.l_high)
    }

    fn check_column(&self, len: usize) -> Result<()> {
        if len != self.params.dft_length / 2 + 1 {
            return Err(Error::ShapeMismatch(format!(
                "column of {len} bins for K = {}",
                self.params.dft_length
            )));
        }
        Ok(())
    }

    /// Smooths `mask` frame by frame, taking each frame's pitch quefrency
    /// from `separated`, the spectrogram of the signal the mask belongs to.
    ///
    /// The recursion starts from the first frame itself, so frame 0 comes
    /// out as the floored input.
    pub fn smooth_mask(&self, mask: &SpectralMask, separated: &Spectrogram) -> Result<SpectralMask> {
        if mask.num_bins() != separated.num_bins() || mask.num_frames() != separated.num_frames() {
            return Err(Error::ShapeMismatch(format!(
                "mask {}×{} vs spectrogram {}×{}",
                mask.num_bins(),
                mask.num_frames(),
                separated.num_bins(),
                separated.num_frames()
            )));
        }
        if separated.config().frame_length() != self.params.dft_length {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram frame length {} but smoothing K = {}",
                separated.config().frame_length(),
                self.params.dft_length
            )));
        }
        let mut out = Vec::with_capacity(mask.values().len());
        let mut state: Option<CepstralFrame> = None;
        for m in 0..mask.num_frames() {
            let l_pitch = self.pitch_quefrency(&self.signal_cepstrum(separated.frame(m), m)?);
            let current = self.mask_frame_to_cepstrum(mask.column(m), m)?;
            let next = match state {
                None => current,
                Some(prev) => smooth_step(&prev, &current, l_pitch, &self.params)?,
            };
            out.extend(self.cepstrum_to_mask(&next)?);
            state = Some(next);
        }
        SpectralMask::new(out, mask.num_bins(), mask.num_frames(), MaskKind::Smoothed)
    }
}
