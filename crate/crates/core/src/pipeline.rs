//! End-to-end operations: separation of a two-channel recording, room
//! simulation of two sources, objective evaluation and reverberation sweeps.

use log::{debug, info};

use crate::bsseval::{PairMetrics, ProjectionBasis};
use crate::config::PipelineConfig;
use crate::mask::isolated_unit_fraction;
use crate::refine::{RefineContext, RefinerRegistry};
use crate::roomsim::{convolve_mix, ImpulseResponseBank, Mixture, RoomSpec};
use crate::signals::{gen_am_source, MultichannelRecording, Waveform};
use crate::stft::{analyze, synthesize, Spectrogram};
use crate::unmixing::{apply_unmixing, estimate_block_covariances, solve_unmixing, SolverState, UnmixingSystem};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SolverSummary {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_step_size: f64,
    pub support_residual: f64,
}

impl SolverSummary {
    fn from_state(state: &SolverState, w: &UnmixingSystem) -> Self {
        Self {
            iterations: state.iterations,
            initial_cost: state.cost_trace.first().copied().unwrap_or(f64::NAN),
            final_cost: state.cost_trace.last().copied().unwrap_or(f64::NAN),
            final_step_size: state.step_size,
            support_residual: w.support_residual(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Separation {
    pub stage1: [Waveform; 2],
    pub outputs: [Waveform; 2],
    pub stage1_spectrograms: [Spectrogram; 2],
    pub refiner: &'static str,
    pub unmixing: UnmixingSystem,
    pub solver: SolverSummary,
    /// Isolated-unit fraction of the binary masks and of the rebinarized
    /// masks that were applied, when the refiner produced masks.
    pub isolated_binary: Option<[f64; 2]>,
    pub isolated_applied: Option<[f64; 2]>,
}

/// Runs the full chain on a two-channel recording. The final outputs are
/// always derived from the stage-1 spectrograms by the configured refiner.
pub fn separate(
    recording: &MultichannelRecording,
    cfg: &PipelineConfig,
    registry: &RefinerRegistry,
) -> Result<Separation> {
    if recording.num_channels() != 2 {
        return Err(Error::InvalidSignal(format!(
            "expected 2 channels, got {}",
            recording.num_channels()
        )));
    }
    let refiner = registry.get(&cfg.refiner)?;
    cfg.validate_for(recording.sample_rate())?;
    let stft = cfg.stft()?;
    let params = cfg.solver();

    let x = [analyze(recording.channel(0), &stft)?, analyze(recording.channel(1), &stft)?];
    let cov = estimate_block_covariances([&x[0], &x[1]], params.block_count)?;
    let (w, state) = solve_unmixing(&cov, &params)?;
    let solver = SolverSummary::from_state(&state, &w);
    info!(
        "unmixing: {} iterations, cost {:.4e} -> {:.4e}",
        solver.iterations, solver.initial_cost, solver.final_cost
    );

    let y = apply_unmixing(&w, [&x[0], &x[1]])?;
    let stage1 = [synthesize(&y[0])?, synthesize(&y[1])?];

    let ctx = RefineContext {
        threshold: cfg.threshold()?,
        smoothing: cfg.smoothing(),
    };
    let refined = refiner.refine([&y[0], &y[1]], &ctx)?;
    debug!("refiner '{}' applied", refiner.name());
    let outputs = [synthesize(&refined.outputs[0])?, synthesize(&refined.outputs[1])?];

    let isolated_binary = refined
        .binary_masks
        .as_ref()
        .map(|m| [isolated_unit_fraction(&m[0]), isolated_unit_fraction(&m[1])]);
    let isolated_applied = refined.applied_masks.as_ref().map(|m| {
        [
            isolated_unit_fraction(&m[0].binarized()),
            isolated_unit_fraction(&m[1].binarized()),
        ]
    });

    Ok(Separation {
        stage1,
        outputs,
        stage1_spectrograms: y,
        refiner: refiner.name(),
        unmixing: w,
        solver,
        isolated_binary,
        isolated_applied,
    })
}

/// The two amplitude-modulated noise sources described by the
/// `synthetic_*` keys. Source 2 uses `seed + 1`.
pub fn synthetic_sources(cfg: &PipelineConfig) -> Result<[Waveform; 2]> {
    Ok([
        gen_am_source(
            cfg.seed,
            cfg.synthetic_duration_s,
            cfg.synthetic_sample_rate,
            cfg.synthetic_mod_rate_1,
        )?,
        gen_am_source(
            cfg.seed.wrapping_add(1),
            cfg.synthetic_duration_s,
            cfg.synthetic_sample_rate,
            cfg.synthetic_mod_rate_2,
        )?,
    ])
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub room: RoomSpec,
    pub bank: ImpulseResponseBank,
    pub sources: [Waveform; 2],
    pub mixture: Mixture,
}

impl Scene {
    /// Dry sources zero-padded to the mixture length, for use as
    /// evaluation references.
    pub fn padded_sources(&self) -> [Waveform; 2] {
        let n = self.mixture.recording.len();
        [self.sources[0].resized(n), self.sources[1].resized(n)]
    }
}

pub fn simulate(sources: [&Waveform; 2], cfg: &PipelineConfig, rt60_ms: f64) -> Result<Scene> {
    if sources[0].sample_rate() != sources[1].sample_rate() {
        return Err(Error::SampleRateMismatch(sources[0].sample_rate(), sources[1].sample_rate()));
    }
    let n = sources[0].len().max(sources[1].len());
    let sources = [sources[0].resized(n), sources[1].resized(n)];
    let room = cfg.room(rt60_ms, sources[0].sample_rate())?;
    let bank = ImpulseResponseBank::simulate(&room)?;
    let mixture = convolve_mix([&sources[0], &sources[1]], &bank)?;
    Ok(Scene {
        room,
        bank,
        sources,
        mixture,
    })
}

/// Metrics of both stages against the same references. The output
/// assignment is the one that maximizes the stage-1 mean SIR and is reused
/// for the final outputs.
#[derive(Debug, Clone)]
pub struct StageMetrics {
    pub stage1: PairMetrics,
    pub outputs: PairMetrics,
}

pub fn evaluate_stages(references: [&Waveform; 2], sep: &Separation, filter_length: usize) -> Result<StageMetrics> {
    let basis = ProjectionBasis::new(references, filter_length)?;
    let stage1 = basis.evaluate_pair([&sep.stage1[0], &sep.stage1[1]])?;
    let outputs = basis.evaluate_assigned([&sep.outputs[0], &sep.outputs[1]], stage1.swapped)?;
    Ok(StageMetrics { stage1, outputs })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub rt60_ms: f64,
    pub scene: Scene,
    pub separation: Separation,
    pub metrics: StageMetrics,
}

/// Simulates, separates and evaluates the same source pair at each
/// reverberation time, in the order given. References are the dry sources.
pub fn sweep(
    sources: [&Waveform; 2],
    rt60_list: &[f64],
    cfg: &PipelineConfig,
    registry: &RefinerRegistry,
) -> Result<Vec<SweepRow>> {
    if rt60_list.is_empty() {
        return Err(Error::Usage("sweep needs at least one RT60".into()));
    }
    rt60_list
        .iter()
        .map(|&rt| {
            info!("sweep: rt60 = {rt} ms");
            let at_rt = |e: Error| Error::Sweep {
                rt60_ms: rt,
                source: Box::new(e),
            };
            let scene = simulate(sources, cfg, rt).map_err(at_rt)?;
            let separation = separate(&scene.mixture.recording, cfg, registry).map_err(at_rt)?;
            let refs = scene.padded_sources();
            let metrics = evaluate_stages([&refs[0], &refs[1]], &separation, cfg.eval_filter_length).map_err(at_rt)?;
            Ok(SweepRow {
                rt60_ms: rt,
                scene,
                separation,
                metrics,
            })
        })
        .collect()
}
