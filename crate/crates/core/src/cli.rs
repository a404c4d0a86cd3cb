//! Command-line front end: `separate`, `simulate`, `evaluate` and `sweep`.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on any other
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bsseval::{segment_sir, Metrics, ProjectionBasis, SegmentAnnotation};
use crate::config::PipelineConfig;
use crate::pipeline::{self, Scene};
use crate::refine::RefinerRegistry;
use crate::report::{self, EvaluationMode, EvaluationReport, OutputSir, SeparationReport, SweepReport, SweepRowReport};
use crate::roomsim::rt60_to_absorption;
use crate::signals::{read_wav, write_wav, MultichannelRecording, Waveform};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "cbss", version, about = "Two-microphone convolutive source separation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Separate a two-channel recording into stage-1 and final outputs.
    Separate {
        /// Two-channel WAV file.
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Mix two sources in a simulated room.
    Simulate {
        #[command(flatten)]
        sources: SourceArgs,
        /// Reverberation time in ms (defaults to `rt60_ms` from the config).
        #[arg(long)]
        rt60: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Measure SIR of two estimates against references or silent segments.
    Evaluate {
        /// The two estimate WAV files (first channel of each is used).
        #[arg(num_args = 2, required = true)]
        estimates: Vec<PathBuf>,
        /// Reference WAV files for projection-based SIR.
        #[arg(long, num_args = 2, value_names = ["REF1", "REF2"])]
        references: Option<Vec<PathBuf>>,
        /// Sample intervals `start1:end1,start2:end2` where output 1 and
        /// output 2 respectively dominate.
        #[arg(long)]
        segments: Option<String>,
        #[command(flatten)]
        common: OptionalOut,
    },
    /// Simulate, separate and evaluate at several reverberation times.
    Sweep {
        #[command(flatten)]
        sources: SourceArgs,
        /// Comma-separated reverberation times in ms.
        #[arg(long, value_delimiter = ',', default_value = "30,50,100,150,200")]
        rt60: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OptionalOut {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for `evaluation.json`; the report is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Two mono source WAV files.
    #[arg(long, num_args = 2, value_names = ["SRC1", "SRC2"], conflicts_with = "synthetic")]
    pub sources: Option<Vec<PathBuf>>,
    /// Use the built-in amplitude-modulated noise sources.
    #[arg(long)]
    pub synthetic: bool,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Separate { input, common } => cmd_separate(&input, &common),
        Command::Simulate { sources, rt60, common } => cmd_simulate(&sources, rt60, &common),
        Command::Evaluate {
            estimates,
            references,
            segments,
            common,
        } => cmd_evaluate(&estimates, references.as_deref(), segments.as_deref(), &common),
        Command::Sweep { sources, rt60, common } => cmd_sweep(&sources, &rt60, &common),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Unwritable {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })
}

fn write_mono(w: &Waveform, path: &Path, cfg: &PipelineConfig) -> Result<()> {
    let rec = MultichannelRecording::new(vec![w.clone()])?;
    write_wav(&rec, path, cfg.output_encoding.into())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_mono(path: &Path) -> Result<Waveform> {
    let rec = read_wav(path)?;
    if rec.num_channels() != 1 {
        log::warn!("{}: using the first of {} channels", path.display(), rec.num_channels());
    }
    Ok(rec.into_channels().swap_remove(0))
}

fn load_sources(args: &SourceArgs, cfg: &PipelineConfig) -> Result<([Waveform; 2], String)> {
    match (&args.sources, args.synthetic) {
        (Some(paths), false) => {
            let s = [read_mono(&paths[0])?, read_mono(&paths[1])?];
            if s[0].sample_rate() != s[1].sample_rate() {
                return Err(Error::SampleRateMismatch(s[0].sample_rate(), s[1].sample_rate()));
            }
            let label = format!("{}, {}", file_label(&paths[0]), file_label(&paths[1]));
            Ok((s, label))
        }
        (None, true) => Ok((pipeline::synthetic_sources(cfg)?, format!("synthetic (seed {})", cfg.seed))),
        _ => Err(Error::Usage("give either --sources SRC1 SRC2 or --synthetic".into())),
    }
}

fn write_separation(sep: &pipeline::Separation, dir: &Path, cfg: &PipelineConfig) -> Result<()> {
    let names = report::OutputFiles::default();
    for k in 0..2 {
        write_mono(&sep.stage1[k], &dir.join(&names.stage1[k]), cfg)?;
        write_mono(&sep.outputs[k], &dir.join(&names.final_[k]), cfg)?;
    }
    Ok(())
}

pub fn cmd_separate(input: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), common.seed)?;
    let registry = RefinerRegistry::with_builtins();
    registry.get(&cfg.refiner)?;
    let recording = read_wav(input)?;
    let sep = pipeline::separate(&recording, &cfg, &registry)?;
    create_dir(&common.out)?;
    write_separation(&sep, &common.out, &cfg)?;
    let rep = SeparationReport::new(file_label(input), &sep, None, &cfg);
    report::write_json(&rep, &common.out.join("report.json"))?;
    println!(
        "separated {} with '{}' in {} iterations; outputs in {}",
        input.display(),
        sep.refiner,
        sep.solver.iterations,
        common.out.display()
    );
    Ok(())
}

fn write_scene(scene: &Scene, dir: &Path, cfg: &PipelineConfig) -> Result<Vec<String>> {
    let mut files = vec!["mixture.wav".to_string()];
    write_wav(&scene.mixture.recording, dir.join("mixture.wav"), cfg.output_encoding.into())?;
    let padded = scene.padded_sources();
    for (i, s) in padded.iter().enumerate() {
        let name = format!("source{}.wav", i + 1);
        write_mono(s, &dir.join(&name), cfg)?;
        files.push(name);
    }
    for (j, row) in scene.mixture.images.iter().enumerate() {
        for (i, img) in row.iter().enumerate() {
            let name = format!("image_mic{}_src{}.wav", j + 1, i + 1);
            write_mono(img, &dir.join(&name), cfg)?;
            files.push(name);
        }
    }
    Ok(files)
}

fn manifest(scene: &Scene, sources: &str, cfg: &PipelineConfig, files: &[String]) -> String {
    let room = &scene.room;
    let d = room.dimensions;
    let absorption = rt60_to_absorption(&d, room.rt60_ms);
    let mut m = String::new();
    let _ = writeln!(m, "rt60_ms = {}", room.rt60_ms);
    let _ = writeln!(m, "absorption = {}", absorption.alpha);
    let _ = writeln!(m, "absorption_capped = {}", absorption.capped);
    let _ = writeln!(m, "room_height_m = {}", d.height);
    let _ = writeln!(m, "room_width_m = {}", d.width);
    let _ = writeln!(m, "room_depth_m = {}", d.depth);
    for (k, p) in room.sources.iter().enumerate() {
        let _ = writeln!(m, "source{} = {} {} {}", k + 1, p.x, p.y, p.z);
    }
    for (k, p) in room.mics.iter().enumerate() {
        let _ = writeln!(m, "mic{} = {} {} {}", k + 1, p.x, p.y, p.z);
    }
    let _ = writeln!(m, "sample_rate = {}", room.sample_rate);
    let _ = writeln!(m, "speed_of_sound = {}", room.speed_of_sound);
    let _ = writeln!(m, "rir_length = {}", room.max_rir_length);
    let _ = writeln!(m, "sources = {sources}");
    let _ = writeln!(m, "seed = {}", cfg.seed);
    for f in files {
        let _ = writeln!(m, "file = {f}");
    }
    m
}

pub fn cmd_simulate(args: &SourceArgs, rt60: Option<f64>, common: &Common) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), common.seed)?;
    let (sources, label) = load_sources(args, &cfg)?;
    let rt = rt60.unwrap_or(cfg.rt60_ms);
    let scene = pipeline::simulate([&sources[0], &sources[1]], &cfg, rt)?;
    create_dir(&common.out)?;
    let files = write_scene(&scene, &common.out, &cfg)?;
    let path = common.out.join("manifest.txt");
    std::fs::write(&path, manifest(&scene, &label, &cfg, &files)).map_err(|e| Error::Unwritable {
        path,
        reason: e.to_string(),
    })?;
    println!("simulated rt60 = {rt} ms; files in {}", common.out.display());
    Ok(())
}

/// Zero-pads every waveform to the longest length.
fn common_length(ws: &mut [Waveform]) -> Result<()> {
    let rate = ws[0].sample_rate();
    if let Some(w) = ws.iter().find(|w| w.sample_rate() != rate) {
        return Err(Error::SampleRateMismatch(rate, w.sample_rate()));
    }
    let n = ws.iter().map(Waveform::len).max().unwrap_or(0);
    for w in ws.iter_mut() {
        if w.len() != n {
            *w = w.resized(n);
        }
    }
    Ok(())
}

pub fn cmd_evaluate(
    estimates: &[PathBuf],
    references: Option<&[PathBuf]>,
    segments: Option<&str>,
    common: &OptionalOut,
) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), None)?;
    let est_names = [file_label(&estimates[0]), file_label(&estimates[1])];
    let rep = match (references, segments) {
        (Some(refs), None) => {
            let mut ws = vec![
                read_mono(&estimates[0])?,
                read_mono(&estimates[1])?,
                read_mono(&refs[0])?,
                read_mono(&refs[1])?,
            ];
            common_length(&mut ws)?;
            let basis = ProjectionBasis::new([&ws[2], &ws[3]], cfg.eval_filter_length)?;
            let m = basis.evaluate_pair([&ws[0], &ws[1]])?;
            let out = |m: Metrics| OutputSir {
                sir_db: m.sir_db,
                sdr_db: Some(m.sdr_db),
                sar_db: Some(m.sar_db),
            };
            EvaluationReport {
                format_version: report::FORMAT_VERSION,
                command: "evaluate",
                sir_convention: report::SIR_CONVENTION,
                mode: EvaluationMode::References,
                estimates: est_names,
                references: Some([file_label(&refs[0]), file_label(&refs[1])]),
                segments: None,
                swapped: Some(m.swapped),
                filter_length: Some(cfg.eval_filter_length),
                outputs: [out(m.outputs[0]), out(m.outputs[1])],
                average_sir_db: m.average_sir_db(),
            }
        }
        (None, Some(text)) => {
            let seg = SegmentAnnotation::parse(text).map_err(|e| Error::Usage(e.to_string()))?;
            let mut ws = vec![read_mono(&estimates[0])?, read_mono(&estimates[1])?];
            common_length(&mut ws)?;
            let (a, b) = segment_sir([&ws[0], &ws[1]], &seg)?;
            let out = |sir_db| OutputSir {
                sir_db,
                sdr_db: None,
                sar_db: None,
            };
            EvaluationReport {
                format_version: report::FORMAT_VERSION,
                command: "evaluate",
                sir_convention: report::SIR_CONVENTION,
                mode: EvaluationMode::Segments,
                estimates: est_names,
                references: None,
                segments: Some(text.to_string()),
                swapped: None,
                filter_length: None,
                outputs: [out(a), out(b)],
                average_sir_db: (a + b) / 2.0,
            }
        }
        (None, None) => return Err(Error::Usage("give either --references or --segments".into())),
        (Some(_), Some(_)) => {
            return Err(Error::Usage("--references and --segments are mutually exclusive".into()))
        }
    };
    println!(
        "SIR output 1: {:.2} dB, output 2: {:.2} dB, average {:.2} dB",
        rep.outputs[0].sir_db, rep.outputs[1].sir_db, rep.average_sir_db
    );
    if let Some(dir) = &common.out {
        create_dir(dir)?;
        report::write_json(&rep, &dir.join("evaluation.json"))?;
    }
    Ok(())
}

pub fn cmd_sweep(args: &SourceArgs, rt60: &[f64], common: &Common) -> Result<()> {
    if rt60.is_empty() {
        return Err(Error::Usage("--rt60 needs at least one value".into()));
    }
    let cfg = load_config(common.config.as_deref(), common.seed)?;
    let registry = RefinerRegistry::with_builtins();
    registry.get(&cfg.refiner)?;
    let (sources, label) = load_sources(args, &cfg)?;
    let rows = pipeline::sweep([&sources[0], &sources[1]], rt60, &cfg, &registry)?;
    create_dir(&common.out)?;
    let mut row_reports = Vec::with_capacity(rows.len());
    for row in &rows {
        let name = format!("rt{}", row.rt60_ms);
        let dir = common.out.join(&name);
        create_dir(&dir)?;
        write_wav(&row.scene.mixture.recording, dir.join("mixture.wav"), cfg.output_encoding.into())?;
        write_separation(&row.separation, &dir, &cfg)?;
        row_reports.push(SweepRowReport::new(row, name));
    }
    let rep = SweepReport {
        format_version: report::FORMAT_VERSION,
        command: "sweep",
        sir_convention: report::SIR_CONVENTION,
        sources: label,
        refiner: cfg.refiner.clone(),
        rows: row_reports,
        parameters: cfg,
    };
    report::write_json(&rep, &common.out.join("sweep.json"))?;
    let table = report::sweep_table(&rep);
    let path = common.out.join("sweep.txt");
    std::fs::write(&path, &table).map_err(|e| Error::Unwritable {
        path,
        reason: e.to_string(),
    })?;
    print!("{table}");
    Ok(())
}
