//! Frequency-domain separation of two convolutive mixtures by joint
//! diagonalization of block-averaged cross-power matrices.
//!
//! For each frequency bin ω the solver looks for a 2×2 matrix `W(ω)` making
//! `W(ω)·R̄(ω,k)·W(ω)ᴴ` diagonal for every time block `k` at once. The bins
//! are coupled by requiring the time-domain unmixing filters to vanish
//! beyond `Q` taps, and the scaling ambiguity is fixed by `W_ii(ω) = 1`.

use std::ops::Range;

use num_complex::Complex64;
use serde::Serialize;

use crate::fft::RealFft;
use crate::linalg::Mat2;
use crate::stft::Spectrogram;
use crate::{Error, Result};

/// Block-averaged 2×2 cross-power matrices, one per (bin, block).
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    // bin-major: matrices[bin * num_blocks + block]
    matrices: Vec<Mat2>,
    num_bins: usize,
    num_blocks: usize,
    frames_per_block: Vec<usize>,
}

impl CovarianceSet {
    pub fn new(matrices: Vec<Mat2>, num_bins: usize, num_blocks: usize) -> Result<Self> {
        if num_blocks == 0 || matrices.len() != num_bins * num_blocks {
            return Err(Error::ShapeMismatch(format!(
                "{} matrices for {num_bins} bins × {num_blocks} blocks",
                matrices.len()
            )));
        }
        Ok(Self {
            matrices,
            num_bins,
            num_blocks,
            frames_per_block: vec![1; num_blocks],
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn frames_per_block(&self) -> &[usize] {
        &self.frames_per_block
    }

    pub fn get(&self, bin: usize, block: usize) -> &Mat2 {
        &self.matrices[bin * self.num_blocks + block]
    }

    /// All blocks of one bin.
    pub fn bin(&self, bin: usize) -> &[Mat2] {
        &self.matrices[bin * self.num_blocks..(bin + 1) * self.num_blocks]
    }

    /// Scales every matrix by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrices: self.matrices.iter().map(|m| m.scale(factor)).collect(),
            ..self.clone()
        }
    }

    /// Each bin's blocks divided by their mean trace. Silent bins stay as is.
    pub fn normalized_per_bin(&self) -> Self {
        let mut out = self.clone();
        for b in 0..self.num_bins {
            let blocks = &mut out.matrices[b * self.num_blocks..(b + 1) * self.num_blocks];
            let mean_trace =
                blocks.iter().map(|m| m.trace().re).sum::<f64>() / self.num_blocks as f64;
            if mean_trace > f64::MIN_POSITIVE {
                blocks.iter_mut().for_each(|m| *m = m.scale(1.0 / mean_trace));
            }
        }
        out
    }
}

/// Splits `[0, frames)` into `blocks` contiguous ranges whose sizes differ by
/// at most one.
fn partition(frames: usize, blocks: usize) -> Vec<Range<usize>> {
    (0..blocks)
        .map(|k| (k * frames / blocks)..((k + 1) * frames / blocks))
        .collect()
}

/// Averages `X(ω,m)·X(ω,m)ᴴ` over contiguous frame blocks.
pub fn estimate_block_covariances(x: [&Spectrogram; 2], num_blocks: usize) -> Result<CovarianceSet> {
    if !x[0].same_shape(x[1]) {
        return Err(Error::ShapeMismatch(
            "channel spectrograms differ in configuration or frame count".into(),
        ));
    }
    let frames = x[0].num_frames();
    if num_blocks == 0 || frames < num_blocks {
        return Err(Error::TooFewFrames {
            frames,
            blocks: num_blocks,
        });
    }
    let num_bins = x[0].num_bins();
    let ranges = partition(frames, num_blocks);
    let mut matrices = Vec::with_capacity(num_bins * num_blocks);
    for bin in 0..num_bins {
        for range in &ranges {
            let n = range.len() as f64;
            let sum = range
                .clone()
                .map(|m| Mat2::outer([x[0].get(bin, m), x[1].get(bin, m)]))
                .fold(Mat2::zeros(), |acc, r| acc + r);
            matrices.push(sum.scale(1.0 / n));
        }
    }
    Ok(CovarianceSet {
        matrices,
        num_bins,
        num_blocks,
        frames_per_block: ranges.iter().map(|r| r.len()).collect(),
    })
}

/// Per-bin unmixing matrices for bins `0..=K/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingSystem {
    matrices: Vec<Mat2>,
    filter_support: usize,
    dft_length: usize,
}

impl UnmixingSystem {
    pub fn identity(dft_length: usize, filter_support: usize) -> Self {
        Self {
            matrices: vec![Mat2::identity(); dft_length / 2 + 1],
            filter_support,
            dft_length,
        }
    }

    pub fn from_matrices(matrices: Vec<Mat2>, dft_length: usize, filter_support: usize) -> Result<Self> {
        if matrices.len() != dft_length / 2 + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} matrices for DFT length {dft_length}",
                matrices.len()
            )));
        }
        if filter_support >= dft_length {
            return Err(Error::InvalidParameter(format!(
                "filter support {filter_support} must be below DFT length {dft_length}"
            )));
        }
        Ok(Self {
            matrices,
            filter_support,
            dft_length,
        })
    }

    pub fn matrices(&self) -> &[Mat2] {
        &self.matrices
    }

    pub fn get(&self, bin: usize) -> &Mat2 {
        &self.matrices[bin]
    }

    pub fn num_bins(&self) -> usize {
        self.matrices.len()
    }

    pub fn filter_support(&self) -> usize {
        self.filter_support
    }

    pub fn dft_length(&self) -> usize {
        self.dft_length
    }

    /// Frequency response of entry `(row, col)` across bins.
    fn entry_response(&self, row: usize, col: usize) -> Vec<Complex64> {
        self.matrices.iter().map(|m| m.0[row][col]).collect()
    }

    /// Real time-domain filter (length `K`) of entry `(row, col)`.
    pub fn filter(&self, row: usize, col: usize) -> Vec<f64> {
        RealFft::new(self.dft_length).inverse(&self.entry_response(row, col))
    }

    /// Largest fraction of an off-diagonal filter's energy found beyond tap
    /// `Q`. Zero filters count as fully supported.
    pub fn support_residual(&self) -> f64 {
        [(0, 1), (1, 0)]
            .iter()
            .map(|&(r, c)| {
                let taps = self.filter(r, c);
                let total: f64 = taps.iter().map(|t| t * t).sum();
                let outside: f64 = taps[self.filter_support + 1..].iter().map(|t| t * t).sum();
                if total > 0.0 {
                    outside / total
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn has_unit_diagonal(&self) -> bool {
        let one = Complex64::new(1.0, 0.0);
        self.matrices
            .iter()
            .all(|m| m.0[0][0] == one && m.0[1][1] == one)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverParams {
    /// Q: unmixing filter taps beyond this index are forced to zero.
    pub filter_support: usize,
    pub block_count: usize,
    pub max_iters: usize,
    /// Base step size, divided per bin by the mean Frobenius norm of that
    /// bin's normalized covariance blocks.
    pub step_size: f64,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub tolerance: f64,
}

impl SolverParams {
    /// `Q = K/4`, 8 blocks, 200 iterations, step 0.5, tolerance 1e-6.
    pub fn defaults_for(dft_length: usize) -> Self {
        Self {
            filter_support: dft_length / 4,
            block_count: 8,
            max_iters: 200,
            step_size: 0.5,
            tolerance: 1e-6,
        }
    }

    pub fn validate(&self, dft_length: usize) -> Result<()> {
        if self.filter_support >= dft_length {
            return Err(Error::InvalidParameter(format!(
                "filter support {} must be below DFT length {dft_length}",
                self.filter_support
            )));
        }
        if self.block_count < 2 {
            return Err(Error::InvalidParameter("at least 2 covariance blocks required".into()));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidParameter("step size must be positive".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Iterate of the projected descent.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub w: UnmixingSystem,
    /// Diagonal model `Λ(ω,k)`, bin-major like [`CovarianceSet`].
    pub lambda: Vec<[f64; 2]>,
    /// `E(ω,k) = W R̄ Wᴴ − Λ`.
    pub residual: Vec<Mat2>,
    pub cost_trace: Vec<f64>,
    pub iterations: usize,
    pub step_size: f64,
}

impl SolverState {
    /// State for `w` with `Λ` set to its cost-minimizing value.
    pub fn new(w: UnmixingSystem, cov: &CovarianceSet) -> Self {
        let mut lambda = Vec::with_capacity(cov.matrices.len());
        let mut residual = Vec::with_capacity(cov.matrices.len());
        for bin in 0..cov.num_bins() {
            let wb = w.get(bin);
            for r in cov.bin(bin) {
                let c = wb.congruence(r);
                let l = diag_of(&c);
                residual.push(c - Mat2::diag(l[0], l[1]));
                lambda.push(l);
            }
        }
        Self {
            w,
            lambda,
            residual,
            cost_trace: Vec::new(),
            iterations: 0,
            step_size: 0.0,
        }
    }
}

fn diag_of(c: &Mat2) -> [f64; 2] {
    [c.0[0][0].re.max(0.0), c.0[1][1].re.max(0.0)]
}

/// `diag(W R̄ Wᴴ)`, real parts floored at zero: the `Λ` minimizing the
/// residual for fixed `W`.
pub fn diag_target(w: &Mat2, r: &Mat2) -> [f64; 2] {
    diag_of(&w.congruence(r))
}

/// `J = Σ_ω Σ_k ‖W R̄ Wᴴ − Λ‖²_F`, summed in bin order.
pub fn cost(state: &SolverState, cov: &CovarianceSet) -> f64 {
    let mut total = 0.0;
    for bin in 0..cov.num_bins() {
        let wb = state.w.get(bin);
        for (k, r) in cov.bin(bin).iter().enumerate() {
            let l = state.lambda[bin * cov.num_blocks() + k];
            total += (wb.congruence(r) - Mat2::diag(l[0], l[1])).frobenius_sqr();
        }
    }
    total
}

/// Per-bin gradient `2·Σ_k E(ω,k)·W(ω)·R̄(ω,k)` with `Λ` held fixed.
///
/// This is the conjugate Wirtinger derivative `∂J/∂W*`; the derivative with
/// respect to the real and imaginary parts of `W` is twice this value.
pub fn cost_gradient(state: &SolverState, cov: &CovarianceSet) -> Vec<Mat2> {
    (0..cov.num_bins())
        .map(|bin| {
            let wb = *state.w.get(bin);
            cov.bin(bin)
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let l = state.lambda[bin * cov.num_blocks() + k];
                    let e = wb.congruence(r) - Mat2::diag(l[0], l[1]);
                    e * wb * *r
                })
                .fold(Mat2::zeros(), |acc, g| acc + g)
                .scale(2.0)
        })
        .collect()
}

/// Projects onto the constraint set: every entry's K-tap real filter is cut
/// to taps `0..=Q`, then the diagonal is reset to exactly 1.
pub fn constrain_filter_support(w: &UnmixingSystem) -> UnmixingSystem {
    let k = w.dft_length();
    let fft = RealFft::new(k);
    let mut out = w.clone();
    for (row, col) in [(0, 1), (1, 0)] {
        let mut taps = fft.inverse(&w.entry_response(row, col));
        taps[w.filter_support() + 1..].iter_mut().for_each(|t| *t = 0.0);
        let response = fft.forward(&taps);
        for (m, v) in out.matrices.iter_mut().zip(response) {
            m.0[row][col] = v;
        }
    }
    let one = Complex64::new(1.0, 0.0);
    for m in &mut out.matrices {
        m.0[0][0] = one;
        m.0[1][1] = one;
    }
    out
}

// Halving limit before a step is declared impossible.
const MAX_HALVINGS: usize = 40;
// Accepted steps after which the step size returns to its base value.
const STEP_RESET_INTERVAL: usize = 5;

/// Projected gradient descent on `J` from `W = I`.
///
/// Covariances are normalized per bin by their mean trace before
/// optimizing; the reported cost trace refers to the normalized problem.
/// A step that raises the cost is retried at half the step size, so the
/// trace never increases.
pub fn solve_unmixing(cov: &CovarianceSet, params: &SolverParams) -> Result<(UnmixingSystem, SolverState)> {
    let dft_length = 2 * (cov.num_bins() - 1);
    params.validate(dft_length)?;
    let cov = cov.normalized_per_bin();

    let bin_steps: Vec<f64> = (0..cov.num_bins())
        .map(|bin| {
            let blocks = cov.bin(bin);
            let mean_norm =
                blocks.iter().map(|m| m.frobenius_sqr().sqrt()).sum::<f64>() / blocks.len() as f64;
            if mean_norm > f64::MIN_POSITIVE {
                params.step_size / mean_norm
            } else {
                params.step_size
            }
        })
        .collect();

    let w0 = constrain_filter_support(&UnmixingSystem::identity(dft_length, params.filter_support));
    let mut state = SolverState::new(w0, &cov);
    let mut current = cost(&state, &cov);
    if !current.is_finite() {
        return Err(Error::Diverged {
            step_size: params.step_size,
        });
    }
    state.cost_trace.push(current);

    let mut eta = 1.0;
    let mut accepted_since_reset = 0;
    for _ in 0..params.max_iters {
        if current == 0.0 {
            break;
        }
        let grad = cost_gradient(&state, &cov);
        let mut next = None;
        let mut last_non_finite = false;
        for _ in 0..MAX_HALVINGS {
            let stepped: Vec<Mat2> = state
                .w
                .matrices()
                .iter()
                .zip(&grad)
                .zip(&bin_steps)
                .map(|((w, g), s)| *w - g.scale(eta * s))
                .collect();
            let candidate = constrain_filter_support(&UnmixingSystem {
                matrices: stepped,
                ..state.w.clone()
            });
            let cand_state = SolverState::new(candidate, &cov);
            let c = cost(&cand_state, &cov);
            last_non_finite = !c.is_finite();
            if c.is_finite() && c <= current {
                next = Some((cand_state, c));
                break;
            }
            eta *= 0.5;
        }
        let Some((mut accepted, c)) = next else {
            if last_non_finite {
                return Err(Error::Diverged {
                    step_size: eta * params.step_size,
                });
            }
            break;
        };
        let decrease = (current - c) / current;
        accepted.cost_trace = std::mem::take(&mut state.cost_trace);
        accepted.cost_trace.push(c);
        accepted.iterations = state.iterations + 1;
        accepted.step_size = eta * params.step_size;
        state = accepted;
        current = c;

        accepted_since_reset += 1;
        if accepted_since_reset == STEP_RESET_INTERVAL {
            eta = 1.0;
            accepted_since_reset = 0;
        }
        if decrease < params.tolerance {
            break;
        }
    }
    log::debug!(
        "unmixing solve: {} iterations, cost {:.4e} -> {:.4e}",
        state.iterations,
        state.cost_trace[0],
        current
    );
    Ok((state.w.clone(), state))
}

/// `Ŝ(ω,m) = W(ω)·X(ω,m)` for every bin and frame.
pub fn apply_unmixing(w: &UnmixingSystem, x: [&Spectrogram; 2]) -> Result<[Spectrogram; 2]> {
    if !x[0].same_shape(x[1]) {
        return Err(Error::ShapeMismatch("channel spectrograms differ in shape".into()));
    }
    if w.num_bins() != x[0].num_bins() {
        return Err(Error::ShapeMismatch(format!(
            "unmixing system has {} bins, spectrogram {}",
            w.num_bins(),
            x[0].num_bins()
        )));
    }
    let nb = x[0].num_bins();
    let n = x[0].values().len();
    let mut y0 = Vec::with_capacity(n);
    let mut y1 = Vec::with_capacity(n);
    for (i, (a, b)) in x[0].values().iter().zip(x[1].values()).enumerate() {
        let y = w.get(i % nb).apply([*a, *b]);
        y0.push(y[0]);
        y1.push(y[1]);
    }
    Ok([x[0].with_values(y0)?, x[1].with_values(y1)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::Waveform;
    use crate::stft::{analyze, StftConfig, Window};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn spectrogram_of(frames: Vec<Vec<Complex64>>, k: usize) -> Spectrogram {
        let cfg = StftConfig::new(k, 0.5, Window::SqrtHann).unwrap();
        let n = frames.len();
        Spectrogram::new(frames.concat(), n, cfg, 8000, k).unwrap()
    }

    #[test]
    fn block_covariance_outer_products() {
        // K = 2 → 2 bins; one frame per block
        let x0 = spectrogram_of(vec![vec![c(1.0), c(1.0)], vec![c(1.0), c(1.0)]], 2);
        let x1 = spectrogram_of(vec![vec![c(0.0), I], vec![c(0.0), I]], 2);
        let cov = estimate_block_covariances([&x0, &x1], 2).unwrap();
        assert_eq!(cov.frames_per_block(), &[1, 1]);
        assert_eq!(*cov.get(0, 0), Mat2::from_real([[1.0, 0.0], [0.0, 0.0]]));
        assert_eq!(*cov.get(1, 1), Mat2::new(c(1.0), -I, I, c(1.0)));
        assert!(matches!(
            estimate_block_covariances([&x0, &x1], 3),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn stationary_white_channels_give_similar_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = StftConfig::new(64, 0.5, Window::SqrtHann).unwrap();
        let len = 8 * 500 * 32;
        let mut gen = || {
            let s: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
            analyze(&Waveform::new(s, 8000).unwrap(), &cfg).unwrap()
        };
        let (a, b) = (gen(), gen());
        let cov = estimate_block_covariances([&a, &b], 8).unwrap();
        for bin in 1..cov.num_bins() - 1 {
            let blocks = cov.bin(bin);
            let mean = blocks
                .iter()
                .fold(Mat2::zeros(), |acc, m| acc + *m)
                .scale(1.0 / 8.0);
            for m in blocks {
                let dev = (*m - mean).frobenius_sqr().sqrt() / mean.frobenius_sqr().sqrt();
                assert!(dev < 0.2, "bin {bin}: deviation {dev}");
            }
        }
    }

    #[test]
    fn diag_target_extracts_and_floors() {
        let r = Mat2::from_real([[2.0, 0.3], [0.3, 5.0]]);
        assert_eq!(diag_target(&Mat2::identity(), &r), [2.0, 5.0]);
        let tiny = Mat2::from_real([[-1e-15, 0.0], [0.0, 1.0]]);
        assert_eq!(diag_target(&Mat2::identity(), &tiny), [0.0, 1.0]);
    }

    fn single_bin_set(r: Mat2) -> CovarianceSet {
        // K = 2: bins 0 and 1; bin 1 left silent
        CovarianceSet::new(vec![r, Mat2::zeros()], 2, 1).unwrap()
    }

    #[test]
    fn cost_hand_values() {
        let diag = single_bin_set(Mat2::from_real([[3.0, 0.0], [0.0, 1.0]]));
        let st = SolverState::new(UnmixingSystem::identity(2, 0), &diag);
        assert_eq!(cost(&st, &diag), 0.0);
        assert!(cost_gradient(&st, &diag).iter().all(|g| g.frobenius_sqr() == 0.0));

        let r = single_bin_set(Mat2::from_real([[1.0, 0.5], [0.5, 1.0]]));
        let st = SolverState::new(UnmixingSystem::identity(2, 0), &r);
        assert!((cost(&st, &r) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gradient_scales_quadratically_with_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = random_psd(&mut rng);
        let w = random_mat(&mut rng);
        let set = single_bin_set(r);
        let w = UnmixingSystem::from_matrices(vec![w, Mat2::identity()], 2, 1).unwrap();
        let g1 = cost_gradient(&SolverState::new(w.clone(), &set), &set);
        let set3 = set.scaled(3.0);
        let g3 = cost_gradient(&SolverState::new(w, &set3), &set3);
        let diff = (g3[0] - g1[0].scale(9.0)).frobenius_sqr().sqrt();
        assert!(diff <= 1e-12 * g3[0].frobenius_sqr().sqrt());
    }

    pub(crate) fn random_mat(rng: &mut ChaCha8Rng) -> Mat2 {
        let mut z = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        Mat2::new(z(), z(), z(), z())
    }

    pub(crate) fn random_psd(rng: &mut ChaCha8Rng) -> Mat2 {
        let a = random_mat(rng);
        a * a.adjoint()
    }

    #[test]
    fn projection_keeps_tap_zero_and_removes_long_delay() {
        let k = 64;
        let q = 8;
        let mut w = UnmixingSystem::identity(k, q);
        let delay = q + 5;
        for (bin, m) in w.matrices.iter_mut().enumerate() {
            m.0[0][1] = c(0.3);
            // pure delay of Q + 5 samples
            m.0[1][0] =
                Complex64::from_polar(1.0, -std::f64::consts::TAU * (bin * delay) as f64 / k as f64);
        }
        let p = constrain_filter_support(&w);
        for m in p.matrices() {
            assert!((m.0[0][1] - c(0.3)).norm() < 1e-12);
            assert!(m.0[1][0].norm() < 1e-12);
        }
        assert!(p.has_unit_diagonal());
        let pp = constrain_filter_support(&p);
        for (a, b) in p.matrices().iter().zip(pp.matrices()) {
            assert!((*a - *b).frobenius_sqr().sqrt() < 1e-12);
        }
    }

    #[test]
    fn apply_identity_and_cancellation() {
        let x0 = spectrogram_of(vec![vec![c(1.0), I, c(2.0)]], 4);
        let w = UnmixingSystem::identity(4, 1);
        let [y0, y1] = apply_unmixing(&w, [&x0, &x0]).unwrap();
        assert_eq!(y0, x0);
        assert_eq!(y1, x0);

        let mut w = UnmixingSystem::identity(4, 1);
        w.matrices.iter_mut().for_each(|m| m.0[0][1] = c(-1.0));
        let [y0, _] = apply_unmixing(&w, [&x0, &x0]).unwrap();
        assert!(y0.values().iter().all(|v| v.norm() == 0.0));

        let wrong = UnmixingSystem::identity(8, 1);
        assert!(apply_unmixing(&wrong, [&x0, &x0]).is_err());
    }
}
