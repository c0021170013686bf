//! Result records and their JSON / CSV serialization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{EpochRecord, Reference};
use crate::privacy::NoisePlan;

use super::spec::ExperimentSpec;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 9] = [
    "algorithm",
    "epsilon",
    "delta",
    "repetition",
    "epoch",
    "excess_risk",
    "grad_norm_sq",
    "cum_sample_grads",
    "wall_ms",
];

/// First quartile, median and third quartile (linear interpolation between
/// order statistics).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// `None` for an empty slice. NaNs sort last.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
        })
    }
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    Quartiles::of(values).map(|q| q.median)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSchedule {
    pub epochs: usize,
    pub inner_steps: Option<usize>,
    pub eta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub epsilon: f64,
    pub delta: f64,
    pub repetition: usize,
    pub seed: u64,
    pub schedule: ResolvedSchedule,
    pub noise: NoisePlan,
    pub final_excess_risk: f64,
    pub final_grad_norm_sq: f64,
    pub sample_gradients: u64,
    pub output_index: Option<usize>,
    pub wall_ms: f64,
    pub records: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub epsilon: f64,
    pub delta: f64,
    pub repetitions: usize,
    pub excess_risk: Quartiles,
    pub grad_norm_sq: Quartiles,
    pub wall_ms: Quartiles,
    pub fell_back: usize,
}

impl Aggregate {
    /// Recomputes the aggregate for one budget from the matching runs.
    pub fn from_runs(epsilon: f64, delta: f64, runs: &[RunSummary]) -> Option<Self> {
        let rows: Vec<&RunSummary> = runs
            .iter()
            .filter(|r| r.epsilon == epsilon && r.delta == delta)
            .collect();
        let pick = |f: fn(&RunSummary) -> f64| -> Vec<f64> { rows.iter().map(|r| f(r)).collect() };
        Some(Self {
            epsilon,
            delta,
            repetitions: rows.len(),
            excess_risk: Quartiles::of(&pick(|r| r.final_excess_risk))?,
            grad_norm_sq: Quartiles::of(&pick(|r| r.final_grad_norm_sq))?,
            wall_ms: Quartiles::of(&pick(|r| r.wall_ms))?,
            fell_back: rows.iter().filter(|r| r.noise.fell_back).count(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub n: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConstants {
    pub lipschitz: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    /// SHA-256 of the spec's JSON serialization.
    pub spec_digest: String,
    pub spec: ExperimentSpec,
    pub dataset: DatasetSummary,
    pub constants: ObjectiveConstants,
    pub reference: Reference,
    pub runs: Vec<RunSummary>,
    pub aggregates: Vec<Aggregate>,
    /// False when a repetition failed; `runs` then holds what finished.
    pub complete: bool,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn emit_results(record: &ResultRecord, format: OutputFormat, path: &Path) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = create(path)?;
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, record)
                .map_err(|e| Error::Serialization(e.to_string()))?;
            out.write_all(b"\n").map_err(io)?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            let ser = |e: csv::Error| Error::Serialization(e.to_string());
            w.write_record(CSV_COLUMNS).map_err(ser)?;
            for run in &record.runs {
                for r in &run.records {
                    w.write_record([
                        run.algorithm.clone(),
                        run.epsilon.to_string(),
                        run.delta.to_string(),
                        run.repetition.to_string(),
                        r.epoch.to_string(),
                        r.excess_risk.map(|v| v.to_string()).unwrap_or_default(),
                        r.grad_norm_sq.to_string(),
                        r.sample_gradients.to_string(),
                        format!("{:.3}", r.wall_ms),
                    ])
                    .map_err(ser)?;
                }
            }
            w.flush().map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_results(path: &Path) -> Result<ResultRecord> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))
}
