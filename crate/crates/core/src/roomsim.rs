//! Image-method room impulse responses and convolutive two-by-two mixing.

use serde::{Deserialize, Serialize};

use crate::fft;
use crate::signals::{MultichannelRecording, Waveform};
use crate::{Error, Result};

/// Point in room coordinates, meters. `x` spans the width, `y` the depth and
/// `z` the height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }

    fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomDimensions {
    pub height: f64,
    pub width: f64,
    pub depth: f64,
}

impl RoomDimensions {
    pub fn volume(&self) -> f64 {
        self.height * self.width * self.depth
    }

    pub fn surface_area(&self) -> f64 {
        2.0 * (self.height * self.width + self.height * self.depth + self.width * self.depth)
    }

    // Extents along x, y, z.
    fn extents(&self) -> [f64; 3] {
        [self.width, self.depth, self.height]
    }

    fn contains(&self, p: &Point3) -> bool {
        p.coords()
            .iter()
            .zip(self.extents())
            .all(|(&c, e)| c > 0.0 && c < e)
    }
}

/// 3.4 m high, 3.8 m wide, 5.2 m deep.
pub const DEFAULT_ROOM: RoomDimensions = RoomDimensions {
    height: 3.4,
    width: 3.8,
    depth: 5.2,
};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoomSpec {
    pub dimensions: RoomDimensions,
    pub sources: [Point3; 2],
    pub mics: [Point3; 2],
    pub rt60_ms: f64,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
    pub max_rir_length: usize,
}

/// Placement of the microphone pair and the two talkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub mic_spacing: f64,
    pub source_distance: f64,
    /// Azimuth of each source from broadside, degrees. Source 1 sits on
    /// microphone 1's side, so each source reaches "its" microphone first
    /// and the cross filters of the ideal unmixing system are causal.
    pub source_angle_deg: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            mic_spacing: 0.2,
            source_distance: 1.0,
            source_angle_deg: 45.0,
        }
    }
}

impl RoomSpec {
    /// Microphones at the room centre on an axis along the width, sources
    /// at `∓angle` from broadside on the same horizontal plane.
    pub fn with_placement(
        dimensions: RoomDimensions,
        placement: Placement,
        rt60_ms: f64,
        sample_rate: u32,
        speed_of_sound: f64,
        max_rir_length: usize,
    ) -> Result<Self> {
        let centre = Point3::new(dimensions.width / 2.0, dimensions.depth / 2.0, dimensions.height / 2.0);
        let half = placement.mic_spacing / 2.0;
        let mics = [
            Point3::new(centre.x - half, centre.y, centre.z),
            Point3::new(centre.x + half, centre.y, centre.z),
        ];
        let angle = placement.source_angle_deg.to_radians();
        let source_at = |sign: f64| {
            Point3::new(
                centre.x + sign * placement.source_distance * angle.sin(),
                centre.y + placement.source_distance * angle.cos(),
                centre.z,
            )
        };
        let spec = Self {
            dimensions,
            sources: [source_at(-1.0), source_at(1.0)],
            mics,
            rt60_ms,
            sample_rate,
            speed_of_sound,
            max_rir_length,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default room and placement. The impulse responses cover 1.5 × RT60
    /// (at least 1024 samples).
    pub fn default_for(rt60_ms: f64, sample_rate: u32) -> Result<Self> {
        Self::with_placement(
            DEFAULT_ROOM,
            Placement::default(),
            rt60_ms,
            sample_rate,
            DEFAULT_SPEED_OF_SOUND,
            default_rir_length(rt60_ms, sample_rate),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dimensions;
        if !(d.height > 0.0 && d.width > 0.0 && d.depth > 0.0) {
            return Err(Error::InvalidGeometry("room dimensions must be positive".into()));
        }
        for (name, pts) in [("source", &self.sources), ("microphone", &self.mics)] {
            for (i, p) in pts.iter().enumerate() {
                if !d.contains(p) {
                    return Err(Error::InvalidGeometry(format!(
                        "{name} {} at ({:.3}, {:.3}, {:.3}) is outside the room",
                        i + 1,
                        p.x,
                        p.y,
                        p.z
                    )));
                }
            }
        }
        if !(self.rt60_ms >= 0.0) || !self.rt60_ms.is_finite() {
            return Err(Error::InvalidGeometry(format!("rt60 {} ms must be ≥ 0", self.rt60_ms)));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::InvalidGeometry("speed of sound must be positive".into()));
        }
        if self.sample_rate == 0 || self.max_rir_length == 0 {
            return Err(Error::InvalidGeometry(
                "sample rate and impulse-response length must be positive".into(),
            ));
        }
        Ok(())
    }
}

pub fn default_rir_length(rt60_ms: f64, sample_rate: u32) -> usize {
    ((1.5 * rt60_ms / 1000.0 * sample_rate as f64).ceil() as usize).max(1024)
}

/// Uniform wall absorption for a target RT60.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Absorption {
    pub alpha: f64,
    /// The Sabine estimate exceeded 1 and was capped (anechoic).
    pub capped: bool,
}

/// Sabine: `rt60 = 0.161·V / (α·A)`. `rt60 = 0` means anechoic (α = 1).
pub fn rt60_to_absorption(dims: &RoomDimensions, rt60_ms: f64) -> Absorption {
    if rt60_ms <= 0.0 {
        return Absorption {
            alpha: 1.0,
            capped: false,
        };
    }
    let alpha = 0.161 * dims.volume() / (rt60_ms / 1000.0 * dims.surface_area());
    if alpha > 1.0 {
        Absorption {
            alpha: 1.0,
            capped: true,
        }
    } else {
        Absorption {
            alpha,
            capped: false,
        }
    }
}

/// Impulse response from source `source` to microphone `mic`.
///
/// Sums image sources whose delay falls inside `max_rir_length`. An image
/// reached through `r` wall reflections at distance `d` adds
/// `(1 − α)^{r/2} / (4πd)` at sample `round(d·fs/c)`.
pub fn generate_rir(room: &RoomSpec, source: usize, mic: usize) -> Result<Waveform> {
    room.validate()?;
    let src = room.sources[source];
    let rcv = room.mics[mic];
    if src.distance(&rcv) == 0.0 {
        return Err(Error::CoincidentPositions {
            source_index: source,
            mic_index: mic,
        });
    }
    let alpha = rt60_to_absorption(&room.dimensions, room.rt60_ms).alpha;
    let reflection = (1.0 - alpha).sqrt();
    let fs = room.sample_rate as f64;
    let c = room.speed_of_sound;
    let len = room.max_rir_length;
    let max_dist = len as f64 * c / fs;
    let extents = room.dimensions.extents();
    let s = src.coords();
    let r = rcv.coords();
    let order: Vec<i64> = extents
        .iter()
        .map(|e| (max_dist / (2.0 * e)).ceil() as i64 + 1)
        .collect();

    // Per axis: (offset from receiver, reflection count) for every image.
    let axis_images = |axis: usize| -> Vec<(f64, i32)> {
        let mut out = Vec::new();
        for n in -order[axis]..=order[axis] {
            for p in 0..2i64 {
                let pos = (1 - 2 * p) as f64 * s[axis] + 2.0 * n as f64 * extents[axis];
                let reflections = ((n - p).abs() + n.abs()) as i32;
                out.push((pos - r[axis], reflections));
            }
        }
        out
    };
    let (xs, ys, zs) = (axis_images(0), axis_images(1), axis_images(2));

    let mut h = vec![0.0; len];
    for &(dx, rx) in &xs {
        for &(dy, ry) in &ys {
            let dxy2 = dx * dx + dy * dy;
            if dxy2 > max_dist * max_dist {
                continue;
            }
            for &(dz, rz) in &zs {
                let d = (dxy2 + dz * dz).sqrt();
                let tap = (d * fs / c).round();
                if tap >= len as f64 {
                    continue;
                }
                let gain = reflection.powi(rx + ry + rz) / (4.0 * std::f64::consts::PI * d);
                if gain != 0.0 {
                    h[tap as usize] += gain;
                }
            }
        }
    }
    Waveform::new(h, room.sample_rate)
}

/// `h[mic][source]` for both microphones and sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseBank {
    pub h: [[Waveform; 2]; 2],
}

impl ImpulseResponseBank {
    pub fn new(h: [[Waveform; 2]; 2]) -> Result<Self> {
        let rate = h[0][0].sample_rate();
        for w in h.iter().flatten() {
            if w.sample_rate() != rate {
                return Err(Error::SampleRateMismatch(rate, w.sample_rate()));
            }
        }
        Ok(Self { h })
    }

    /// Logs a warning when the requested RT60 is too short for the room and
    /// the responses fall back to anechoic.
    pub fn simulate(room: &RoomSpec) -> Result<Self> {
        if rt60_to_absorption(&room.dimensions, room.rt60_ms).capped {
            log::warn!(
                "rt60 {} ms is below what this room can reach; using an anechoic room",
                room.rt60_ms
            );
        }
        Self::new([
            [generate_rir(room, 0, 0)?, generate_rir(room, 1, 0)?],
            [generate_rir(room, 0, 1)?, generate_rir(room, 1, 1)?],
        ])
    }

    pub fn sample_rate(&self) -> u32 {
        self.h[0][0].sample_rate()
    }

    pub fn max_len(&self) -> usize {
        self.h.iter().flatten().map(Waveform::len).max().unwrap_or(0)
    }
}

/// Convolutive mixture and the per-source images at each microphone.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub recording: MultichannelRecording,
    /// `images[mic][source] = h[mic][source] * s_source`.
    pub images: [[Waveform; 2]; 2],
}

/// `x_j = Σ_i h[j][i] * s_i`, with output length `N + L − 1` for the longer
/// source length `N` and longest response `L`.
pub fn convolve_mix(sources: [&Waveform; 2], bank: &ImpulseResponseBank) -> Result<Mixture> {
    let rate = bank.sample_rate();
    for s in sources {
        if s.sample_rate() != rate {
            return Err(Error::SampleRateMismatch(rate, s.sample_rate()));
        }
    }
    let n = sources[0].len().max(sources[1].len());
    let out_len = n + bank.max_len() - 1;
    let padded = [sources[0].resized(n), sources[1].resized(n)];
    let image = |mic: usize, src: usize| -> Result<Waveform> {
        let mut y = fft::convolve(padded[src].samples(), bank.h[mic][src].samples());
        y.resize(out_len, 0.0);
        Waveform::new(y, rate)
    };
    let images = [[image(0, 0)?, image(0, 1)?], [image(1, 0)?, image(1, 1)?]];
    let mix = |mic: usize| -> Result<Waveform> {
        let [a, b] = &images[mic];
        Waveform::new(a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect(), rate)
    };
    let recording = MultichannelRecording::new(vec![mix(0)?, mix(1)?])?;
    Ok(Mixture { recording, images })
}

/// Schroeder backward-integrated energy decay in dB, normalized to 0 dB at
/// the first sample.
pub fn energy_decay_curve(h: &[f64]) -> Vec<f64> {
    let mut tail = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (t, v) in tail.iter_mut().zip(h).rev() {
        acc += v * v;
        *t = acc;
    }
    let total = tail.first().copied().unwrap_or(0.0);
    tail.iter()
        .map(|e| 10.0 * (e / total).max(1e-300).log10())
        .collect()
}

/// Reverberation time in ms from a least-squares line through the decay
/// curve between `-start_db` and `-end_db`, extrapolated to −60 dB.
pub fn estimate_rt60_ms(h: &Waveform, start_db: f64, end_db: f64) -> Option<f64> {
    let edc = energy_decay_curve(h.samples());
    let pts: Vec<(f64, f64)> = edc
        .iter()
        .enumerate()
        .filter(|(_, &db)| db <= -start_db && db >= -end_db)
        .map(|(i, &db)| (i as f64, db))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    Some(-60.0 / slope / h.sample_rate() as f64 * 1000.0)
}
