//! JSON reports written by the command-line tool. Field names are part of
//! the output format; `FORMAT_VERSION` changes whenever they do.

use std::path::Path;

use serde::Serialize;

use crate::bsseval::{Metrics, PairMetrics};
use crate::config::PipelineConfig;
use crate::pipeline::{Separation, SolverSummary, StageMetrics, SweepRow};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub const SIR_CONVENTION: &str = "10*log10(energy ratio), capped at +/-100 dB";

#[derive(Debug, Clone, Serialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_step_size: f64,
    pub support_residual: f64,
}

impl From<&SolverSummary> for SolverReport {
    fn from(s: &SolverSummary) -> Self {
        Self {
            iterations: s.iterations,
            initial_cost: s.initial_cost,
            final_cost: s.final_cost,
            final_step_size: s.final_step_size,
            support_residual: s.support_residual,
        }
    }
}

/// Isolated-unit fractions of the raw binary masks and of the applied masks
/// after rebinarization at 0.5.
#[derive(Debug, Clone, Serialize)]
pub struct IsolationReport {
    pub binary: [f64; 2],
    pub smoothed: [f64; 2],
}

impl IsolationReport {
    fn of(binary: Option<[f64; 2]>, applied: Option<[f64; 2]>) -> Option<Self> {
        Some(Self {
            binary: binary?,
            smoothed: applied?,
        })
    }
}

/// Rows of one stage: signal 1, signal 2 and their average.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub signal1: Metrics,
    pub signal2: Metrics,
    pub average_sir_db: f64,
}

impl From<&PairMetrics> for StageReport {
    fn from(m: &PairMetrics) -> Self {
        Self {
            signal1: m.outputs[0],
            signal2: m.outputs[1],
            average_sir_db: m.average_sir_db(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// `true` when output 1 was matched to reference 2.
    pub swapped: bool,
    pub stage1: StageReport,
    #[serde(rename = "final")]
    pub final_: StageReport,
}

impl From<&StageMetrics> for MetricsReport {
    fn from(m: &StageMetrics) -> Self {
        Self {
            swapped: m.stage1.swapped,
            stage1: (&m.stage1).into(),
            final_: (&m.outputs).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFiles {
    pub stage1: [String; 2],
    #[serde(rename = "final")]
    pub final_: [String; 2],
}

impl Default for OutputFiles {
    fn default() -> Self {
        Self {
            stage1: ["stage1_1.wav".into(), "stage1_2.wav".into()],
            final_: ["final_1.wav".into(), "final_2.wav".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub format_version: u32,
    pub command: &'static str,
    pub sir_convention: &'static str,
    pub input: String,
    pub refiner: &'static str,
    /// Where the final outputs were derived from; always the stage-1
    /// spectrograms.
    pub final_from: &'static str,
    pub outputs: OutputFiles,
    pub solver: SolverReport,
    pub isolated_unit_fraction: Option<IsolationReport>,
    pub metrics: Option<MetricsReport>,
    pub parameters: PipelineConfig,
}

impl SeparationReport {
    pub fn new(input: String, sep: &Separation, metrics: Option<&StageMetrics>, cfg: &PipelineConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            command: "separate",
            sir_convention: SIR_CONVENTION,
            input,
            refiner: sep.refiner,
            final_from: "stage1",
            outputs: OutputFiles::default(),
            solver: (&sep.solver).into(),
            isolated_unit_fraction: IsolationReport::of(sep.isolated_binary, sep.isolated_applied),
            metrics: metrics.map(Into::into),
            parameters: cfg.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationMode {
    References,
    Segments,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSir {
    pub sir_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sar_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub command: &'static str,
    pub sir_convention: &'static str,
    pub mode: EvaluationMode,
    pub estimates: [String; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub references: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swapped: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_length: Option<usize>,
    pub outputs: [OutputSir; 2],
    pub average_sir_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRowReport {
    pub rt60_ms: f64,
    pub directory: String,
    pub stage1: StageReport,
    #[serde(rename = "final")]
    pub final_: StageReport,
    pub swapped: bool,
    pub isolated_unit_fraction: Option<IsolationReport>,
    pub solver: SolverReport,
}

impl SweepRowReport {
    pub fn new(row: &SweepRow, directory: String) -> Self {
        Self {
            rt60_ms: row.rt60_ms,
            directory,
            stage1: (&row.metrics.stage1).into(),
            final_: (&row.metrics.outputs).into(),
            swapped: row.metrics.stage1.swapped,
            isolated_unit_fraction: IsolationReport::of(
                row.separation.isolated_binary,
                row.separation.isolated_applied,
            ),
            solver: (&row.separation.solver).into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub format_version: u32,
    pub command: &'static str,
    pub sir_convention: &'static str,
    pub sources: String,
    pub refiner: String,
    pub rows: Vec<SweepRowReport>,
    pub parameters: PipelineConfig,
}

/// Plain-text table with one group of rows per reverberation time.
pub fn sweep_table(report: &SweepReport) -> String {
    let mut out = String::from("RT(ms)  signal     stage1 SIR  final SIR  isolated binary  isolated smoothed\n");
    for row in &report.rows {
        let iso = row.isolated_unit_fraction.as_ref();
        let cells = [
            ("signal 1", row.stage1.signal1.sir_db, row.final_.signal1.sir_db, iso.map(|i| (i.binary[0], i.smoothed[0]))),
            ("signal 2", row.stage1.signal2.sir_db, row.final_.signal2.sir_db, iso.map(|i| (i.binary[1], i.smoothed[1]))),
            (
                "average",
                row.stage1.average_sir_db,
                row.final_.average_sir_db,
                iso.map(|i| ((i.binary[0] + i.binary[1]) / 2.0, (i.smoothed[0] + i.smoothed[1]) / 2.0)),
            ),
        ];
        for (label, s1, fin, iso) in cells {
            let (b, s) = match iso {
                Some((b, s)) => (format!("{b:.4}"), format!("{s:.4}")),
                None => ("-".into(), "-".into()),
            };
            out.push_str(&format!(
                "{:<7} {label:<9} {s1:>10.2} {fin:>10.2} {b:>16} {s:>18}\n",
                row.rt60_ms
            ));
        }
    }
    out
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
