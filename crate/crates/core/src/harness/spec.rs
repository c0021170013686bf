//! Experiment specification, read from a flat TOML document.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::data::{DataKind, DatasetSource, LabelMode, Normalization};
use crate::error::{Error, Result};
use crate::geometry::{AccMdSchedule, BodyKind, ConvexBody};
use crate::objective::{LossKind, Regularizer};
use crate::optimizers::{Calibration, OutputMode};
use crate::privacy::{CalibrationConstants, PrivacyBudget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    DpSvrg,
    DpSvrgPp,
    DpGd,
    DpAccmd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DpSvrg => "dp_svrg",
            Algorithm::DpSvrgPp => "dp_svrg_pp",
            Algorithm::DpGd => "dp_gd",
            Algorithm::DpAccmd => "dp_accmd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts both the short CLI names and the full names.
impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "svrg" | "dp_svrg" => Ok(Algorithm::DpSvrg),
            "svrgpp" | "dp_svrg_pp" => Ok(Algorithm::DpSvrgPp),
            "gd" | "dp_gd" => Ok(Algorithm::DpGd),
            "accmd" | "dp_accmd" => Ok(Algorithm::DpAccmd),
            other => Err(format!("unknown algorithm `{other}` (svrg, svrgpp, gd, accmd)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    #[default]
    SquaredL2,
    L1,
}

impl FromStr for RegularizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "squared_l2" => Ok(Self::SquaredL2),
            "l1" => Ok(Self::L1),
            other => Err(format!("unknown regularizer `{other}` (none, squared_l2, l1)")),
        }
    }
}

fn default_dataset() -> String {
    "synth:logistic:n=1000,p=10,seed=1".into()
}
fn default_lambda() -> f64 {
    0.01
}
fn default_epsilon() -> Vec<f64> {
    vec![0.2, 0.5, 1.0]
}
fn default_delta() -> f64 {
    1e-3
}
fn one() -> f64 {
    1.0
}
fn default_repetitions() -> usize {
    1
}
fn default_reference_tol() -> f64 {
    super::reference::DEFAULT_REFERENCE_TOLERANCE
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}
fn default_width_samples() -> usize {
    10_000
}

/// Every field has a default, so an empty document is a valid spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    /// A file path or `synth:logistic:...` / `synth:quadratic:...`.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default)]
    pub normalization: Option<Normalization>,
    /// Zero-based CSV label column (default: last).
    #[serde(default)]
    pub label_column: Option<usize>,
    /// Multi-class label treated as `+1`; the others become `-1`.
    #[serde(default)]
    pub positive_class: Option<f64>,
    /// Keep file labels exactly as read.
    #[serde(default)]
    pub raw_labels: bool,
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub subsample_seed: u64,
    pub loss: LossKind,
    #[serde(default)]
    pub regularizer: RegularizerKind,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Constraint body for DP-AccMD.
    #[serde(default = "default_body")]
    pub body: BodyKind,
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default)]
    pub accmd_schedule: AccMdSchedule,
    #[serde(default = "default_width_samples")]
    pub width_samples: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    /// Outer epochs (SVRG family) or iterations (GD, AccMD).
    #[serde(default, rename = "T")]
    pub t: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub output_mode: OutputMode,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    /// Output prefix; `.json` and `.csv` are appended.
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_body() -> BodyKind {
    BodyKind::L2Ball
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        toml::from_str("algorithm = \"dp_svrg\"\nloss = \"logistic\"").expect("defaults parse")
    }
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.repetitions == 0 {
            return bad("repetitions must be ≥ 1".into());
        }
        if self.epsilon.is_empty() {
            return bad("at least one epsilon is required".into());
        }
        for &e in &self.epsilon {
            PrivacyBudget::new(e, self.delta)?;
        }
        self.constants().validate()?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be ≥ 0, got {}", self.lambda));
        }
        if matches!(self.t, Some(0)) || matches!(self.m, Some(0)) {
            return bad("T and m must be ≥ 1".into());
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta must be > 0, got {eta}"));
            }
        }
        if !(self.reference_tol > 0.0) {
            return bad("reference_tol must be positive".into());
        }
        if self.algorithm == Algorithm::DpAccmd {
            if !(self.radius > 0.0 && self.radius.is_finite()) {
                return bad(format!("radius must be > 0, got {}", self.radius));
            }
            if self.width_samples < crate::geometry::width::MIN_WIDTH_SAMPLES {
                return bad("width_samples must be ≥ 100".into());
            }
        }
        if matches!(self.algorithm, Algorithm::DpGd | Algorithm::DpAccmd)
            && self.regularizer == RegularizerKind::L1
        {
            return bad(format!(
                "{} needs a smooth objective; use regularizer = \"none\" or \"squared_l2\", or dp_svrg for l1",
                self.algorithm
            ));
        }
        self.source()?;
        Ok(())
    }

    pub fn source(&self) -> Result<DatasetSource> {
        let mut kind: DataKind = self.dataset.parse()?;
        if let DataKind::CsvFile { label_column, .. } = &mut kind {
            *label_column = self.label_column;
        }
        let labels = match (self.raw_labels, self.positive_class) {
            (true, Some(_)) => {
                return Err(Error::InvalidConfig(
                    "raw_labels and positive_class are mutually exclusive".into(),
                ))
            }
            (true, None) => LabelMode::Raw,
            (false, Some(positive)) => LabelMode::OneVsRest { positive },
            (false, None) => LabelMode::Auto,
        };
        Ok(DatasetSource {
            kind,
            normalization: self.normalization,
            labels,
            subsample: self.subsample,
            subsample_seed: self.subsample_seed,
        })
    }

    pub fn regularizer_value(&self) -> Regularizer {
        match self.regularizer {
            RegularizerKind::None => Regularizer::None,
            RegularizerKind::SquaredL2 => Regularizer::SquaredL2 {
                lambda: self.lambda,
            },
            RegularizerKind::L1 => Regularizer::L1 {
                lambda: self.lambda,
            },
        }
    }

    pub fn body_value(&self, dim: usize) -> ConvexBody {
        match self.body {
            BodyKind::L2Ball => ConvexBody::l2_ball(dim, self.radius),
            BodyKind::L1Ball => ConvexBody::l1_ball(dim, self.radius),
        }
    }

    pub fn constants(&self) -> CalibrationConstants {
        CalibrationConstants {
            c: self.c,
            c1: self.c1,
            c2: self.c2,
        }
    }

    /// JSON and CSV output paths derived from `out`.
    pub fn output_paths(&self) -> (PathBuf, PathBuf) {
        let base = match self.out.extension().and_then(|e| e.to_str()) {
            Some("json" | "csv") => self.out.with_extension(""),
            _ => self.out.clone(),
        };
        let with = |ext: &str| {
            let mut s = base.clone().into_os_string();
            s.push(ext);
            PathBuf::from(s)
        };
        (with(".json"), with(".csv"))
    }
}
