//! Time-domain audio containers, WAV I/O and a synthetic non-stationary
//! source generator.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Mono sampled signal. Samples are finite; the sample rate is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Copy zero-padded or truncated to `len` samples.
    pub fn resized(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn scaled(&self, gain: f64) -> Result<Self> {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate)
    }
}

/// Channels sharing one sample rate and one length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelRecording {
    channels: Vec<Waveform>,
}

impl MultichannelRecording {
    pub fn new(channels: Vec<Waveform>) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidSignal("recording needs at least one channel".into()))?;
        for ch in &channels[1..] {
            if ch.sample_rate() != first.sample_rate() {
                return Err(Error::SampleRateMismatch(first.sample_rate(), ch.sample_rate()));
            }
            if ch.len() != first.len() {
                return Err(Error::InvalidSignal(format!(
                    "channel lengths differ: {} vs {}",
                    first.len(),
                    ch.len()
                )));
            }
        }
        Ok(Self { channels })
    }

    pub fn channels(&self) -> &[Waveform] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Waveform> {
        self.channels
    }

    pub fn channel(&self, index: usize) -> &Waveform {
        &self.channels[index]
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.channels[0].sample_rate()
    }
}

/// Sample encodings accepted by [`read_wav`] and produced by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

const PCM16_SCALE: f64 = 32768.0;

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::UnsupportedWav {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Reads a PCM16 or float32 RIFF/WAVE file with one or two channels.
///
/// PCM16 samples are scaled by 1/32768, one scale for every channel.
pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelRecording> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path).map_err(|e| corrupt(path, e.to_string()))?;
    let spec = reader.spec();
    let num_channels = spec.channels as usize;
    if !(1..=2).contains(&num_channels) {
        return Err(corrupt(path, format!("{num_channels} channels, expected 1 or 2")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| corrupt(path, e.to_string()))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| corrupt(path, e.to_string()))?,
        (format, bits) => {
            return Err(corrupt(path, format!("{bits}-bit {format:?} samples not supported")));
        }
    };
    let frames = interleaved.len() / num_channels;
    if frames == 0 {
        return Err(Error::EmptyAudio(path.to_path_buf()));
    }
    let channels = (0..num_channels)
        .map(|c| {
            let samples = interleaved
                .iter()
                .skip(c)
                .step_by(num_channels)
                .copied()
                .collect();
            Waveform::new(samples, spec.sample_rate)
                .map_err(|e| corrupt(path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    MultichannelRecording::new(channels)
}

/// Writes `rec` as a RIFF/WAVE file. PCM16 output clips to [-1, 1] first.
pub fn write_wav(
    rec: &MultichannelRecording,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let unwritable = |e: hound::Error| Error::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let spec = hound::WavSpec {
        channels: rec.num_channels() as u16,
        sample_rate: rec.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(unwritable)?;
    for n in 0..rec.len() {
        for ch in rec.channels() {
            let x = ch.samples()[n];
            match encoding {
                WavEncoding::Pcm16 => {
                    let q = (x.clamp(-1.0, 1.0) * PCM16_SCALE).round();
                    writer
                        .write_sample(q.clamp(-32768.0, 32767.0) as i16)
                        .map_err(unwritable)?;
                }
                WavEncoding::Float32 => writer.write_sample(x as f32).map_err(unwritable)?,
            }
        }
    }
    writer.finalize().map_err(unwritable)
}

/// Floor of the modulation envelope relative to its peak.
const ENVELOPE_FLOOR: f64 = 0.05;
const PEAK_LEVEL: f64 = 0.9;

/// White Gaussian noise under a raised-sinusoid amplitude envelope at
/// `mod_rate` Hz with a seed-dependent phase, peak-normalized to 0.9.
///
/// The envelope swings between 5% and 100% of its peak, giving the
/// block-to-block power variation that joint diagonalization relies on.
pub fn gen_am_source(seed: u64, duration_s: f64, sample_rate: u32, mod_rate: f64) -> Result<Waveform> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::InvalidParameter("sample rate must be positive".into()));
    }
    if !(0.5..=16.0).contains(&mod_rate) {
        return Err(Error::InvalidParameter(format!(
            "modulation rate {mod_rate} Hz outside [0.5, 16]"
        )));
    }
    let len = (duration_s * sample_rate as f64).round() as usize;
    if len == 0 {
        return Err(Error::InvalidParameter("duration shorter than one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = rng.random::<f64>() * std::f64::consts::TAU;
    let omega = std::f64::consts::TAU * mod_rate / sample_rate as f64;
    let mut samples: Vec<f64> = (0..len)
        .map(|n| {
            let raised = 0.5 * (1.0 + (omega * n as f64 + phase).sin());
            let envelope = ENVELOPE_FLOOR + (1.0 - ENVELOPE_FLOOR) * raised;
            let noise: f64 = StandardNormal.sample(&mut rng);
            envelope * noise
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        let gain = PEAK_LEVEL / peak;
        samples.iter_mut().for_each(|s| *s *= gain);
    }
    Waveform::new(samples, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_pcm16(path: &Path, channels: u16, rate: u32, data: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in data {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_fixed_point_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("half.wav");
        write_raw_pcm16(&p, 1, 8000, &[16384]);
        let rec = read_wav(&p).unwrap();
        assert_eq!(rec.num_channels(), 1);
        assert!((rec.channel(0).samples()[0] - 0.5).abs() <= 1.0 / 32768.0);
    }

    #[test]
    fn stereo_header_passthrough() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("stereo.wav");
        let data: Vec<i16> = (0..100_000).map(|i| (i % 200) as i16).collect();
        write_raw_pcm16(&p, 2, 10_000, &data);
        let rec = read_wav(&p).unwrap();
        assert_eq!(rec.num_channels(), 2);
        assert_eq!(rec.len(), 50_000);
        assert_eq!(rec.sample_rate(), 10_000);
        // channel order: even interleaved slots belong to channel 0
        assert_eq!(rec.channel(0).samples()[1], 2.0 / 32768.0);
        assert_eq!(rec.channel(1).samples()[1], 3.0 / 32768.0);
    }

    #[test]
    fn distinct_read_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = read_wav(dir.path().join("nope.wav")).unwrap_err();
        assert!(matches!(missing, Error::MissingFile(_)));

        let p = dir.path().join("trunc.wav");
        std::fs::write(&p, b"RIFF\x24\x00\x00\x00WAVEfmt ").unwrap();
        let err = read_wav(&p).unwrap_err();
        assert!(matches!(err, Error::UnsupportedWav { .. }), "{err}");
        assert!(err.to_string().contains("unsupported/corrupt WAV"));

        let p = dir.path().join("empty.wav");
        write_raw_pcm16(&p, 2, 16_000, &[]);
        assert!(matches!(read_wav(&p).unwrap_err(), Error::EmptyAudio(_)));

        let p = dir.path().join("pcm24.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p).unwrap_err(), Error::UnsupportedWav { .. }));
    }

    #[test]
    fn pcm16_clips_out_of_range_samples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clip.wav");
        let rec = MultichannelRecording::new(vec![Waveform::new(vec![1.7, -3.0], 8000).unwrap()])
            .unwrap();
        write_wav(&rec, &p, WavEncoding::Pcm16).unwrap();
        let mut reader = hound::WavReader::open(&p).unwrap();
        let raw: Vec<i16> = reader.samples::<i16>().map(|s| s.unwrap()).collect();
        assert_eq!(raw, vec![i16::MAX, i16::MIN]);
    }

    #[test]
    fn unwritable_path_is_reported() {
        let rec = MultichannelRecording::new(vec![Waveform::new(vec![0.0], 8000).unwrap()]).unwrap();
        let err = write_wav(&rec, "/nonexistent-dir/x.wav", WavEncoding::Float32).unwrap_err();
        assert!(matches!(err, Error::Unwritable { .. }));
    }

    #[test]
    fn waveform_rejects_non_finite() {
        assert!(Waveform::new(vec![0.0, f64::NAN], 8000).is_err());
        assert!(Waveform::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn am_source_is_deterministic_and_bounded() {
        let a = gen_am_source(7, 0.5, 10_000, 2.0).unwrap();
        let b = gen_am_source(7, 0.5, 10_000, 2.0).unwrap();
        assert_eq!(a, b);
        let peak = a.samples().iter().fold(0.0f64, |m, s| m.max(s.abs()));
        assert!((peak - 0.9).abs() < 1e-12);
        assert!(gen_am_source(7, 0.0, 10_000, 2.0).is_err());
        assert!(gen_am_source(7, -1.0, 10_000, 2.0).is_err());
        assert!(gen_am_source(7, 1.0, 10_000, 20.0).is_err());
    }
}
