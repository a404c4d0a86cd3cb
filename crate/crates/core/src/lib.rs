//! Two-microphone convolutive blind speech separation.
//!
//! The processing chain is:
//!
//! 1. [`stft`] converts both microphone signals into spectrograms.
//! 2. [`unmixing`] estimates per-bin 2×2 unmixing matrices by jointly
//!    diagonalizing block-averaged cross-power matrices, under a short
//!    unmixing-filter support and a unit-diagonal constraint.
//! 3. [`mask`] derives binary time-frequency masks from the two separated
//!    spectrograms.
//! 4. [`cepsmooth`] smooths those masks over time in the cepstral domain,
//!    protecting the spectral envelope and the pitch quefrency.
//! 5. The smoothed masks are applied and the outputs resynthesized.
//!
//! [`roomsim`] fabricates reverberant test mixtures with the image method and
//! [`bsseval`] measures the signal-to-interference ratio of the results.
//! Which post-separation refinement runs is chosen by name through
//! [`refine::RefinerRegistry`].

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsseval;
pub mod cli;
pub mod cepsmooth;
pub mod config;
pub mod error;
pub mod fft;
pub mod linalg;
pub mod mask;
pub mod pipeline;
pub mod refine;
pub mod report;
pub mod roomsim;
pub mod signals;
pub mod stft;
pub mod unmixing;

pub use error::{Error, Result};
pub use num_complex::Complex64;
