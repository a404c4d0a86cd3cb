//! Thin wrappers over `rustfft` for real-valued sequences.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward/inverse transform pair of a fixed length, operating on real
/// sequences and their non-negative-frequency half spectra.
#[derive(Clone)]
pub struct RealFft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RealFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealFft").field("len", &self.len).finish()
    }
}

impl RealFft {
    pub fn new(len: usize) -> Self {
        assert!(len >= 2 && len.is_multiple_of(2), "transform length must be even");
        let mut planner = FftPlanner::new();
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of stored bins, `len / 2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Unnormalized DFT of a real sequence, full length.
    pub fn forward_full(&self, input: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(input.len(), self.len);
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Unnormalized DFT of a real sequence, bins `0..=len/2`.
    pub fn forward(&self, input: &[f64]) -> Vec<Complex64> {
        let mut full = self.forward_full(input);
        full.truncate(self.num_bins());
        full
    }

    /// Inverse DFT (scaled by `1/len`) of the Hermitian extension of `half`.
    ///
    /// Imaginary parts of the DC and Nyquist bins do not contribute.
    pub fn inverse(&self, half: &[Complex64]) -> Vec<f64> {
        let mut buf = hermitian_expand(half, self.len);
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// In-place unnormalized forward transform of a full complex buffer.
    pub fn process_forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// In-place unnormalized inverse transform of a full complex buffer.
    pub fn process_inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

/// Expands bins `0..=len/2` to a full conjugate-symmetric spectrum.
pub fn hermitian_expand(half: &[Complex64], len: usize) -> Vec<Complex64> {
    assert_eq!(half.len(), len / 2 + 1, "half spectrum has wrong length");
    let mut full = Vec::with_capacity(len);
    full.extend_from_slice(half);
    for k in (len / 2 + 1)..len {
        full.push(half[len - k].conj());
    }
    full
}

fn padded_len(n: usize) -> usize {
    n.next_power_of_two().max(2)
}

/// Full linear convolution of two real sequences, length `a + b - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = padded_len(out_len);
    let fft = RealFft::new(n);
    let mut pa = a.to_vec();
    pa.resize(n, 0.0);
    let mut pb = b.to_vec();
    pb.resize(n, 0.0);
    let fa = fft.forward(&pa);
    let fb = fft.forward(&pb);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = fft.inverse(&prod);
    out.truncate(out_len);
    out
}

/// Cross-correlation `c[max_lag + lag] = Σ_t x(t)·y(t + lag)` for
/// `lag ∈ [-max_lag, max_lag]`, with both sequences zero outside their support.
pub fn cross_correlation(x: &[f64], y: &[f64], max_lag: usize) -> Vec<f64> {
    let n = padded_len(x.len() + y.len() + max_lag);
    let fft = RealFft::new(n);
    let mut px = x.to_vec();
    px.resize(n, 0.0);
    let mut py = y.to_vec();
    py.resize(n, 0.0);
    let fx = fft.forward(&px);
    let fy = fft.forward(&py);
    let prod: Vec<Complex64> = fx.iter().zip(&fy).map(|(a, b)| a.conj() * b).collect();
    let circ = fft.inverse(&prod);
    (0..=2 * max_lag)
        .map(|i| {
            let lag = i as isize - max_lag as isize;
            circ[lag.rem_euclid(n as isize) as usize]
        })
        .collect()
}
