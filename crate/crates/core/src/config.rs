//! Pipeline configuration: a flat `key = value` TOML file whose keys mirror
//! the parameter names used throughout the crate. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cepsmooth::{PitchRange, SmoothingParams};
use crate::mask::MaskThreshold;
use crate::roomsim::{Placement, RoomDimensions, RoomSpec};
use crate::signals::WavEncoding;
use crate::stft::{StftConfig, Window};
use crate::unmixing::SolverParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitchUnit {
    Bins,
    Hz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputEncoding {
    Float32,
    Pcm16,
}

impl From<OutputEncoding> for WavEncoding {
    fn from(e: OutputEncoding) -> Self {
        match e {
            OutputEncoding::Float32 => WavEncoding::Float32,
            OutputEncoding::Pcm16 => WavEncoding::Pcm16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dft_length: usize,
    pub overlap_factor: f64,
    pub window: Window,

    /// Unmixing filter support Q in taps; 0 selects `dft_length / 4`.
    pub filter_support: usize,
    pub block_count: usize,
    pub max_iters: usize,
    pub step_size: f64,
    pub tolerance: f64,

    pub mask_threshold: f64,
    pub refiner: String,

    pub beta_env: f64,
    pub beta_pitch: f64,
    pub beta_peak: f64,
    pub l_env: usize,
    pub pitch_range: PitchUnit,
    pub l_low: usize,
    pub l_high: usize,
    pub pitch_min_hz: f64,
    pub pitch_max_hz: f64,
    pub mask_floor: f64,

    pub rt60_ms: f64,
    pub room_height: f64,
    pub room_width: f64,
    pub room_depth: f64,
    pub mic_spacing: f64,
    pub source_distance: f64,
    pub source_angle_deg: f64,
    pub speed_of_sound: f64,
    /// Impulse-response length in samples; 0 selects 1.5 × RT60 (≥ 1024).
    pub rir_length: usize,

    pub seed: u64,
    pub synthetic_duration_s: f64,
    pub synthetic_sample_rate: u32,
    pub synthetic_mod_rate_1: f64,
    pub synthetic_mod_rate_2: f64,

    pub eval_filter_length: usize,
    pub output_encoding: OutputEncoding,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let room = crate::roomsim::DEFAULT_ROOM;
        let placement = Placement::default();
        Self {
            dft_length: 2048,
            overlap_factor: 0.75,
            window: Window::SqrtHann,
            filter_support: 0,
            block_count: 8,
            max_iters: 200,
            step_size: 0.5,
            tolerance: 1e-6,
            mask_threshold: 1.0,
            refiner: "cepstral".into(),
            beta_env: 0.0,
            beta_pitch: 0.4,
            beta_peak: 0.9,
            l_env: 8,
            pitch_range: PitchUnit::Bins,
            l_low: 16,
            l_high: 120,
            pitch_min_hz: 50.0,
            pitch_max_hz: 500.0,
            mask_floor: 1e-3,
            rt60_ms: 30.0,
            room_height: room.height,
            room_width: room.width,
            room_depth: room.depth,
            mic_spacing: placement.mic_spacing,
            source_distance: placement.source_distance,
            source_angle_deg: placement.source_angle_deg,
            speed_of_sound: crate::roomsim::DEFAULT_SPEED_OF_SOUND,
            rir_length: 0,
            seed: 1,
            synthetic_duration_s: 5.0,
            synthetic_sample_rate: 10_000,
            synthetic_mod_rate_1: 1.0,
            synthetic_mod_rate_2: 1.6,
            eval_filter_length: crate::bsseval::DEFAULT_FILTER_LENGTH,
            output_encoding: OutputEncoding::Float32,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::Io(e)
            }
        })?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    /// Checks every sub-configuration that does not depend on the input
    /// sample rate.
    pub fn check(&self) -> Result<()> {
        let stft = self.stft()?;
        self.solver().validate(stft.frame_length())?;
        self.threshold()?;
        if self.eval_filter_length == 0 {
            return Err(Error::Config("eval_filter_length must be ≥ 1".into()));
        }
        if !(self.rt60_ms >= 0.0) {
            return Err(Error::Config("rt60_ms must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Full validation for input at `sample_rate`.
    pub fn validate_for(&self, sample_rate: u32) -> Result<()> {
        self.check()?;
        self.smoothing().pitch_bins(sample_rate)?;
        Ok(())
    }

    pub fn stft(&self) -> Result<StftConfig> {
        StftConfig::new(self.dft_length, self.overlap_factor, self.window)
    }

    pub fn solver(&self) -> SolverParams {
        SolverParams {
            filter_support: if self.filter_support == 0 {
                self.dft_length / 4
            } else {
                self.filter_support
            },
            block_count: self.block_count,
            max_iters: self.max_iters,
            step_size: self.step_size,
            tolerance: self.tolerance,
        }
    }

    pub fn threshold(&self) -> Result<MaskThreshold> {
        MaskThreshold::new(self.mask_threshold)
    }

    pub fn smoothing(&self) -> SmoothingParams {
        SmoothingParams {
            beta_env: self.beta_env,
            beta_pitch: self.beta_pitch,
            beta_peak: self.beta_peak,
            l_env: self.l_env,
            pitch_range: match self.pitch_range {
                PitchUnit::Bins => PitchRange::Bins {
                    low: self.l_low,
                    high: self.l_high,
                },
                PitchUnit::Hz => PitchRange::Hz {
                    min: self.pitch_min_hz,
                    max: self.pitch_max_hz,
                },
            },
            mask_floor: self.mask_floor,
            dft_length: self.dft_length,
        }
    }

    pub fn room(&self, rt60_ms: f64, sample_rate: u32) -> Result<RoomSpec> {
        let rir_length = if self.rir_length == 0 {
            crate::roomsim::default_rir_length(rt60_ms, sample_rate)
        } else {
            self.rir_length
        };
        RoomSpec::with_placement(
            RoomDimensions {
                height: self.room_height,
                width: self.room_width,
                depth: self.room_depth,
            },
            Placement {
                mic_spacing: self.mic_spacing,
                source_distance: self.source_distance,
                source_angle_deg: self.source_angle_deg,
            },
            rt60_ms,
            sample_rate,
            self.speed_of_sound,
            rir_length,
        )
    }
}
