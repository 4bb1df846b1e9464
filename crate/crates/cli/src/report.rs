use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use serpens::layout::CompileStats;
use serpens::models::ModelEstimate;
use serpens::sim::{CycleCounts, SimResult};
use serpens::{Config, DenseVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: Some(detail.into()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    pub cycles: CycleCounts,
    pub padding_ratio: f64,
    pub hazard_violations: u64,
    pub row_windows: usize,
    /// simulated cycles over the analytic estimate
    pub cycles_vs_model: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_out: Option<DenseVector>,
}

impl SimSummary {
    pub fn new(r: &SimResult, model: &ModelEstimate, include_y: bool) -> Self {
        SimSummary {
            cycles: r.cycles.clone(),
            padding_ratio: r.padding_ratio,
            hazard_violations: r.hazard_violations,
            row_windows: r.row_windows,
            cycles_vs_model: if model.cycles == 0 {
                1.0
            } else {
                r.cycles.total as f64 / model.cycles as f64
            },
            y_out: include_y.then(|| r.y_out.clone()),
        }
    }
}

/// Everything one `simulate` run produces, in a stable JSON shape.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub matrix: String,
    pub config: Config,
    pub inputs: BTreeMap<&'static str, String>,
    pub model: ModelEstimate,
    pub sim: SimSummary,
    pub verdicts: BTreeMap<&'static str, Verdict>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PreprocessReport {
    pub schema_version: u32,
    pub input: String,
    pub output: String,
    pub nrows: usize,
    pub ncols: usize,
    pub config: Config,
    pub row_windows: usize,
    pub segments: usize,
    pub stats: CompileStats,
    /// min over max valid elements per channel; 1.0 is perfect balance
    pub channel_balance: f64,
    pub image_bytes: u64,
}

pub fn channel_balance(stats: &CompileStats) -> f64 {
    let max = stats.valid_per_channel.iter().copied().max().unwrap_or(0);
    let min = stats.valid_per_channel.iter().copied().min().unwrap_or(0);
    if max == 0 {
        1.0
    } else {
        min as f64 / max as f64
    }
}

/// Prints `value` as pretty JSON on stdout and optionally to `path`.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = path {
        std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}")?;
    Ok(())
}
