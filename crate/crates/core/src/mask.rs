//! Binary time-frequency masks and their application.

use serde::Serialize;

use crate::stft::Spectrogram;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Binary,
    Smoothed,
}

/// Real weights over (bin, frame), frame-major like [`Spectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMask {
    values: Vec<f64>,
    num_bins: usize,
    num_frames: usize,
    kind: MaskKind,
}

impl SpectralMask {
    pub fn new(values: Vec<f64>, num_bins: usize, num_frames: usize, kind: MaskKind) -> Result<Self> {
        if values.len() != num_bins * num_frames {
            return Err(Error::ShapeMismatch(format!(
                "{} mask values for {num_bins} bins × {num_frames} frames",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal("mask has non-finite values".into()));
        }
        if kind == MaskKind::Binary && values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidSignal("binary mask values must be 0 or 1".into()));
        }
        Ok(Self {
            values,
            num_bins,
            num_frames,
            kind,
        })
    }

    pub fn filled(value: f64, num_bins: usize, num_frames: usize, kind: MaskKind) -> Result<Self> {
        Self::new(vec![value; num_bins * num_frames], num_bins, num_frames, kind)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[frame * self.num_bins + bin]
    }

    pub fn column(&self, frame: usize) -> &[f64] {
        &self.values[frame * self.num_bins..(frame + 1) * self.num_bins]
    }

    /// `1 − M` as a mask of the same kind.
    pub fn complement(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            ..self.clone()
        }
    }

    /// Thresholds at 0.5 (values ≥ 0.5 become 1).
    pub fn binarized(&self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
            kind: MaskKind::Binary,
            ..self.clone()
        }
    }

    fn matches(&self, s: &Spectrogram) -> bool {
        self.num_bins == s.num_bins() && self.num_frames == s.num_frames()
    }
}

/// Dominance threshold τ > 0 for binary mask estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaskThreshold(f64);

impl MaskThreshold {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("mask threshold {tau} must be positive")));
        }
        Ok(Self(tau))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for MaskThreshold {
    fn default() -> Self {
        Self(1.0)
    }
}

/// `M1 = 1` where `|S1| > τ|S2|`, `M2 = 1` where `|S2| > τ|S1|`, zero
/// elsewhere. Ties leave both masks at zero.
pub fn estimate_binary_masks(
    s1: &Spectrogram,
    s2: &Spectrogram,
    tau: MaskThreshold,
) -> Result<(SpectralMask, SpectralMask)> {
    if !s1.same_shape(s2) {
        return Err(Error::ShapeMismatch("spectrograms differ in shape".into()));
    }
    let t = tau.value();
    let (m1, m2): (Vec<f64>, Vec<f64>) = s1
        .values()
        .iter()
        .zip(s2.values())
        .map(|(a, b)| {
            let (a, b) = (a.norm(), b.norm());
            ((a > t * b) as u8 as f64, (b > t * a) as u8 as f64)
        })
        .unzip();
    let (nb, nf) = (s1.num_bins(), s1.num_frames());
    Ok((
        SpectralMask::new(m1, nb, nf, MaskKind::Binary)?,
        SpectralMask::new(m2, nb, nf, MaskKind::Binary)?,
    ))
}

/// Elementwise `M(k,m)·S(k,m)`.
pub fn apply_mask(mask: &SpectralMask, s: &Spectrogram) -> Result<Spectrogram> {
    if !mask.matches(s) {
        return Err(Error::ShapeMismatch(format!(
            "mask {}×{} vs spectrogram {}×{}",
            mask.num_bins(),
            mask.num_frames(),
            s.num_bins(),
            s.num_frames()
        )));
    }
    s.with_values(
        s.values()
            .iter()
            .zip(mask.values())
            .map(|(v, m)| v * *m)
            .collect(),
    )
}

/// Fraction of active units (value ≥ 0.5) none of whose 4-neighbours
/// (k±1, m±1) is active. An empty mask yields 0.
pub fn isolated_unit_fraction(mask: &SpectralMask) -> f64 {
    let (nb, nf) = (mask.num_bins(), mask.num_frames());
    let active = |k: usize, m: usize| mask.get(k, m) >= 0.5;
    let mut total = 0usize;
    let mut isolated = 0usize;
    for m in 0..nf {
        for k in 0..nb {
            if !active(k, m) {
                continue;
            }
            total += 1;
            let neighbour = (k > 0 && active(k - 1, m))
                || (k + 1 < nb && active(k + 1, m))
                || (m > 0 && active(k, m - 1))
                || (m + 1 < nf && active(k, m + 1));
            if !neighbour {
                isolated += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        isolated as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{StftConfig, Window};
    use num_complex::Complex64;

    fn spec(vals: &[f64]) -> Spectrogram {
        // K = 2 → 2 bins per frame
        let cfg = StftConfig::new(2, 0.5, Window::SqrtHann).unwrap();
        let v: Vec<Complex64> = vals.iter().map(|&x| Complex64::new(0.0, x)).collect();
        let frames = v.len() / 2;
        Spectrogram::new(v, frames, cfg, 8000, 2).unwrap()
    }

    #[test]
    fn dominance_ties_and_silence() {
        let s1 = spec(&[2.0, 1.0, 0.0, 1.0]);
        let s2 = spec(&[1.0, -1.0, 0.0, 3.0]);
        let (m1, m2) = estimate_binary_masks(&s1, &s2, MaskThreshold::default()).unwrap();
        assert_eq!(m1.values(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m2.values(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(m1.kind(), MaskKind::Binary);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = spec(&[1.0, 1.0]);
        let b = spec(&[1.0, 1.0, 1.0, 1.0]);
        assert!(estimate_binary_masks(&a, &b, MaskThreshold::default()).is_err());
        let m = SpectralMask::filled(1.0, 2, 2, MaskKind::Binary).unwrap();
        assert!(apply_mask(&m, &a).is_err());
    }

    #[test]
    fn threshold_must_be_positive() {
        assert!(MaskThreshold::new(0.0).is_err());
        assert!(MaskThreshold::new(-1.0).is_err());
        assert!(MaskThreshold::new(2.0).is_ok());
    }

    #[test]
    fn identity_and_annihilation() {
        let s = spec(&[1.0, -2.0, 3.0, 4.0]);
        let ones = SpectralMask::filled(1.0, 2, 2, MaskKind::Binary).unwrap();
        assert_eq!(apply_mask(&ones, &s).unwrap(), s);
        let zeros = SpectralMask::filled(0.0, 2, 2, MaskKind::Binary).unwrap();
        assert!(apply_mask(&zeros, &s).unwrap().values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn isolation_cases() {
        let checker: Vec<f64> = (0..8 * 6).map(|i| ((i % 8 + i / 8) % 2) as f64).collect();
        let m = SpectralMask::new(checker, 8, 6, MaskKind::Binary).unwrap();
        assert_eq!(isolated_unit_fraction(&m), 1.0);

        let solid = SpectralMask::filled(1.0, 8, 6, MaskKind::Binary).unwrap();
        assert_eq!(isolated_unit_fraction(&solid), 0.0);

        let mut single = vec![0.0; 48];
        single[3 * 8 + 4] = 1.0;
        let m = SpectralMask::new(single, 8, 6, MaskKind::Binary).unwrap();
        assert_eq!(isolated_unit_fraction(&m), 1.0);

        let empty = SpectralMask::filled(0.0, 8, 6, MaskKind::Binary).unwrap();
        assert_eq!(isolated_unit_fraction(&empty), 0.0);
    }
}
