//! Separation quality metrics.
//!
//! Reference-based metrics split an estimate into a target part (the target
//! reference passed through an `L`-tap filter), an interference part (what
//! the other reference's `L`-tap filtered span adds) and an artifact
//! remainder, following the BSS evaluation toolbox. Reference-free metrics
//! compare output power over user-annotated segments.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::fft;
use crate::signals::Waveform;
use crate::{Error, Result};

/// dB values are clamped to ±100 dB.
pub const SIR_CAP_DB: f64 = 100.0;

pub const DEFAULT_FILTER_LENGTH: usize = 512;

const DIAGONAL_LOADING: f64 = 1e-9;

/// `estimate = s_target + e_interf + e_artif`, all of length `N + L − 1`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub s_target: Waveform,
    pub e_interf: Waveform,
    pub e_artif: Waveform,
    pub filter_length: usize,
    /// The normal equations needed diagonal loading.
    pub regularized: bool,
}

/// Cholesky factors of the reference Gram matrices, reusable across
/// estimates.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    references: [Vec<f64>; 2],
    sample_rate: u32,
    filter_length: usize,
    target_only: [nalgebra::Cholesky<f64, nalgebra::Dyn>; 2],
    both: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    regularized: bool,
}

fn factor(mut gram: DMatrix<f64>) -> (nalgebra::Cholesky<f64, nalgebra::Dyn>, bool) {
    if let Some(ch) = gram.clone().cholesky() {
        return (ch, false);
    }
    let n = gram.nrows();
    let mean_diag = (gram.trace() / n as f64).max(1.0);
    for i in 0..n {
        gram[(i, i)] += DIAGONAL_LOADING * mean_diag;
    }
    let ch = gram
        .cholesky()
        .expect("diagonally loaded Gram matrix is positive definite");
    (ch, true)
}

impl ProjectionBasis {
    pub fn new(references: [&Waveform; 2], filter_length: usize) -> Result<Self> {
        if filter_length == 0 {
            return Err(Error::InvalidParameter("filter length must be ≥ 1".into()));
        }
        let [r0, r1] = references;
        if r0.sample_rate() != r1.sample_rate() {
            return Err(Error::SampleRateMismatch(r0.sample_rate(), r1.sample_rate()));
        }
        if r0.len() != r1.len() {
            return Err(Error::ShapeMismatch(format!(
                "reference lengths differ: {} vs {}",
                r0.len(),
                r1.len()
            )));
        }
        let l = filter_length;
        let refs = [r0.samples().to_vec(), r1.samples().to_vec()];
        // cc[a][b][L-1 + lag] = Σ_t r_a(t)·r_b(t + lag)
        let cc = |a: usize, b: usize| fft::cross_correlation(&refs[a], &refs[b], l - 1);
        let corr = [[cc(0, 0), cc(0, 1)], [cc(1, 0), cc(1, 1)]];
        // Gram[(a,p),(b,q)] = Σ_t r_a(t)·r_b(t + p − q)
        let gram = DMatrix::from_fn(2 * l, 2 * l, |i, j| {
            let (a, p) = (i / l, i % l);
            let (b, q) = (j / l, j % l);
            corr[a][b][l - 1 + p - q]
        });
        let (both, reg_both) = factor(gram.clone());
        let (t0, reg0) = factor(gram.view((0, 0), (l, l)).into_owned());
        let (t1, reg1) = factor(gram.view((l, l), (l, l)).into_owned());
        Ok(Self {
            references: refs,
            sample_rate: r0.sample_rate(),
            filter_length: l,
            target_only: [t0, t1],
            both,
            regularized: reg_both || reg0 || reg1,
        })
    }

    pub fn filter_length(&self) -> usize {
        self.filter_length
    }

    /// Decomposes `estimate` with reference `target` as the wanted source.
    pub fn decompose(&self, estimate: &Waveform, target: usize) -> Result<Decomposition> {
        if estimate.sample_rate() != self.sample_rate {
            return Err(Error::SampleRateMismatch(self.sample_rate, estimate.sample_rate()));
        }
        let n = self.references[0].len();
        if estimate.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "estimate has {} samples, references {n}",
                estimate.len()
            )));
        }
        let l = self.filter_length;
        let out_len = n + l - 1;
        // b[(a,p)] = Σ_t r_a(t)·e(t + p)
        let rhs: Vec<Vec<f64>> = self
            .references
            .iter()
            .map(|r| fft::cross_correlation(r, estimate.samples(), l - 1)[l - 1..].to_vec())
            .collect();
        let synth = |coeffs: &[f64], a: usize| {
            let mut y = fft::convolve(&self.references[a], coeffs);
            y.resize(out_len, 0.0);
            y
        };

        let target_coeffs = self.target_only[target].solve(&DVector::from_vec(rhs[target].clone()));
        let s_target = synth(target_coeffs.as_slice(), target);

        let all_rhs: Vec<f64> = rhs.concat();
        let all_coeffs = self.both.solve(&DVector::from_vec(all_rhs));
        let p0 = synth(&all_coeffs.as_slice()[..l], 0);
        let p1 = synth(&all_coeffs.as_slice()[l..], 1);

        let mut padded = estimate.samples().to_vec();
        padded.resize(out_len, 0.0);
        let mut e_interf = Vec::with_capacity(out_len);
        let mut e_artif = Vec::with_capacity(out_len);
        for i in 0..out_len {
            let p_all = p0[i] + p1[i];
            e_interf.push(p_all - s_target[i]);
            e_artif.push(padded[i] - p_all);
        }
        Ok(Decomposition {
            s_target: Waveform::new(s_target, self.sample_rate)?,
            e_interf: Waveform::new(e_interf, self.sample_rate)?,
            e_artif: Waveform::new(e_artif, self.sample_rate)?,
            filter_length: l,
            regularized: self.regularized,
        })
    }
}

/// One-shot decomposition of `estimate` against `references[target]`.
pub fn project_decompose(
    estimate: &Waveform,
    references: [&Waveform; 2],
    target: usize,
    filter_length: usize,
) -> Result<Decomposition> {
    ProjectionBasis::new(references, filter_length)?.decompose(estimate, target)
}

fn capped_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        return -SIR_CAP_DB;
    }
    if den <= 1e-12 * num {
        return SIR_CAP_DB;
    }
    (10.0 * (num / den).log10()).clamp(-SIR_CAP_DB, SIR_CAP_DB)
}

/// `10·log10(‖s_target‖² / ‖e_interf‖²)`.
pub fn sir_db(d: &Decomposition) -> f64 {
    capped_db(d.s_target.energy(), d.e_interf.energy())
}

pub fn sdr_db(d: &Decomposition) -> f64 {
    let err: f64 = d
        .e_interf
        .samples()
        .iter()
        .zip(d.e_artif.samples())
        .map(|(i, a)| (i + a).powi(2))
        .sum();
    capped_db(d.s_target.energy(), err)
}

pub fn sar_db(d: &Decomposition) -> f64 {
    let kept: f64 = d
        .s_target
        .samples()
        .iter()
        .zip(d.e_interf.samples())
        .map(|(t, i)| (t + i).powi(2))
        .sum();
    capped_db(kept, d.e_artif.energy())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub sir_db: f64,
    pub sdr_db: f64,
    pub sar_db: f64,
}

impl Metrics {
    pub fn of(d: &Decomposition) -> Self {
        Self {
            sir_db: sir_db(d),
            sdr_db: sdr_db(d),
            sar_db: sar_db(d),
        }
    }
}

/// Metrics for an estimate pair under the better of the two output-to-
/// reference assignments (by mean SIR).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMetrics {
    pub outputs: [Metrics; 2],
    /// `true` when output 1 matched reference 2.
    pub swapped: bool,
}

impl PairMetrics {
    pub fn average_sir_db(&self) -> f64 {
        (self.outputs[0].sir_db + self.outputs[1].sir_db) / 2.0
    }
}

impl ProjectionBasis {
    pub fn evaluate_pair(&self, estimates: [&Waveform; 2]) -> Result<PairMetrics> {
        let direct = [
            Metrics::of(&self.decompose(estimates[0], 0)?),
            Metrics::of(&self.decompose(estimates[1], 1)?),
        ];
        let crossed = [
            Metrics::of(&self.decompose(estimates[0], 1)?),
            Metrics::of(&self.decompose(estimates[1], 0)?),
        ];
        let mean = |m: &[Metrics; 2]| m[0].sir_db + m[1].sir_db;
        Ok(if mean(&crossed) > mean(&direct) {
            PairMetrics {
                outputs: crossed,
                swapped: true,
            }
        } else {
            PairMetrics {
                outputs: direct,
                swapped: false,
            }
        })
    }

    /// Metrics under a fixed assignment.
    pub fn evaluate_assigned(&self, estimates: [&Waveform; 2], swapped: bool) -> Result<PairMetrics> {
        let (t0, t1) = if swapped { (1, 0) } else { (0, 1) };
        Ok(PairMetrics {
            outputs: [
                Metrics::of(&self.decompose(estimates[0], t0)?),
                Metrics::of(&self.decompose(estimates[1], t1)?),
            ],
            swapped,
        })
    }
}

/// Sample intervals where output 1 (`t1`) and output 2 (`t2`) are active
/// while the other output is quiet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SegmentAnnotation {
    pub t1: Range<usize>,
    pub t2: Range<usize>,
}

impl SegmentAnnotation {
    pub fn new(t1: Range<usize>, t2: Range<usize>) -> Result<Self> {
        if t1.is_empty() || t2.is_empty() {
            return Err(Error::InvalidParameter("segments must be non-empty".into()));
        }
        if t1.start < t2.end && t2.start < t1.end {
            return Err(Error::InvalidParameter(format!(
                "segments {t1:?} and {t2:?} overlap"
            )));
        }
        Ok(Self { t1, t2 })
    }

    /// Parses `start1:end1,start2:end2`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("malformed segments '{text}'"));
        let ranges: Vec<Range<usize>> = text
            .split(',')
            .map(|part| {
                let (a, b) = part.trim().split_once(':').ok_or_else(bad)?;
                let a = a.trim().parse().map_err(|_| bad())?;
                let b = b.trim().parse().map_err(|_| bad())?;
                Ok(a..b)
            })
            .collect::<Result<_>>()?;
        match <[Range<usize>; 2]>::try_from(ranges) {
            Ok([t1, t2]) => Self::new(t1, t2),
            Err(_) => Err(bad()),
        }
    }

    fn check_bounds(&self, len: usize) -> Result<()> {
        if self.t1.end > len || self.t2.end > len {
            return Err(Error::InvalidParameter(format!(
                "segments exceed signal length {len}"
            )));
        }
        Ok(())
    }
}

fn mean_power(x: &[f64], seg: &Range<usize>) -> f64 {
    x[seg.clone()].iter().map(|v| v * v).sum::<f64>() / seg.len() as f64
}

/// `SIR1 = 10·log10(P1(T1) / P1(T2))`, `SIR2 = 10·log10(P2(T2) / P2(T1))`,
/// with `P` the mean square over a segment.
pub fn segment_sir(outputs: [&Waveform; 2], seg: &SegmentAnnotation) -> Result<(f64, f64)> {
    for o in outputs {
        seg.check_bounds(o.len())?;
    }
    let (a, b) = (outputs[0].samples(), outputs[1].samples());
    Ok((
        capped_db(mean_power(a, &seg.t1), mean_power(a, &seg.t2)),
        capped_db(mean_power(b, &seg.t2), mean_power(b, &seg.t1)),
    ))
}
