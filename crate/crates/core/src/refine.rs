//! Post-separation refinement strategies, registered by name.
//!
//! A refiner turns the two stage-1 spectrograms into the final pair. The
//! built-in entries are `none` (stage-1 output as is), `binary` (binary
//! dominance masks) and `cepstral` (binary masks smoothed in the cepstral
//! domain before they are applied).

use std::collections::BTreeMap;

use crate::cepsmooth::{CepstralSmoother, SmoothingParams};
use crate::mask::{apply_mask, estimate_binary_masks, MaskThreshold, SpectralMask};
use crate::stft::Spectrogram;
use crate::{Error, Result};

/// Inputs shared by every refiner.
#[derive(Debug, Clone, Copy)]
pub struct RefineContext {
    pub threshold: MaskThreshold,
    pub smoothing: SmoothingParams,
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub outputs: [Spectrogram; 2],
    /// Masks estimated from the stage-1 pair, if the refiner used any.
    pub binary_masks: Option<[SpectralMask; 2]>,
    /// Masks actually applied to produce `outputs`.
    pub applied_masks: Option<[SpectralMask; 2]>,
}

pub trait MaskRefiner: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    fn refine(&self, stage1: [&Spectrogram; 2], ctx: &RefineContext) -> Result<Refinement>;
}

struct PassThrough;

impl MaskRefiner for PassThrough {
    fn name(&self) -> &'static str {
        "none"
    }

    fn description(&self) -> &'static str {
        "stage-1 separation only"
    }

    fn refine(&self, stage1: [&Spectrogram; 2], _ctx: &RefineContext) -> Result<Refinement> {
        Ok(Refinement {
            outputs: [stage1[0].clone(), stage1[1].clone()],
            binary_masks: None,
            applied_masks: None,
        })
    }
}

struct BinaryMasking;

impl MaskRefiner for BinaryMasking {
    fn name(&self) -> &'static str {
        "binary"
    }

    fn description(&self) -> &'static str {
        "binary dominance masks applied to the stage-1 pair"
    }

    fn refine(&self, stage1: [&Spectrogram; 2], ctx: &RefineContext) -> Result<Refinement> {
        let (m1, m2) = estimate_binary_masks(stage1[0], stage1[1], ctx.threshold)?;
        let outputs = [apply_mask(&m1, stage1[0])?, apply_mask(&m2, stage1[1])?];
        Ok(Refinement {
            outputs,
            binary_masks: Some([m1.clone(), m2.clone()]),
            applied_masks: Some([m1, m2]),
        })
    }
}

struct CepstralSmoothing;

impl MaskRefiner for CepstralSmoothing {
    fn name(&self) -> &'static str {
        "cepstral"
    }

    fn description(&self) -> &'static str {
        "binary masks smoothed over time in the cepstral domain"
    }

    fn refine(&self, stage1: [&Spectrogram; 2], ctx: &RefineContext) -> Result<Refinement> {
        let (m1, m2) = estimate_binary_masks(stage1[0], stage1[1], ctx.threshold)?;
        let smoother = CepstralSmoother::new(ctx.smoothing, stage1[0].sample_rate())?;
        // each mask takes its pitch from the signal it keeps
        let s1 = smoother.smooth_mask(&m1, stage1[0])?;
        let s2 = smoother.smooth_mask(&m2, stage1[1])?;
        let outputs = [apply_mask(&s1, stage1[0])?, apply_mask(&s2, stage1[1])?];
        Ok(Refinement {
            outputs,
            binary_masks: Some([m1, m2]),
            applied_masks: Some([s1, s2]),
        })
    }
}

pub struct RefinerRegistry {
    entries: BTreeMap<&'static str, Box<dyn MaskRefiner>>,
}

impl RefinerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(PassThrough));
        reg.register(Box::new(BinaryMasking));
        reg.register(Box::new(CepstralSmoothing));
        reg
    }

    /// Adds `refiner`, replacing any entry of the same name.
    pub fn register(&mut self, refiner: Box<dyn MaskRefiner>) {
        self.entries.insert(refiner.name(), refiner);
    }

    pub fn get(&self, name: &str) -> Result<&dyn MaskRefiner> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            Error::Config(format!(
                "unknown refiner '{name}' (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries.values().map(|r| (r.name(), r.description())).collect()
    }
}

impl Default for RefinerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
