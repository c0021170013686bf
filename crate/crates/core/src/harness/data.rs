//! Dataset sources: LIBSVM and CSV files, and seeded synthetic instances.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::objective::{sigmoid, Dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataKind {
    LibsvmFile {
        path: PathBuf,
        /// Feature count; inferred from the largest index when absent.
        dim: Option<usize>,
    },
    CsvFile {
        path: PathBuf,
        /// Zero-based label column; the last column when absent.
        label_column: Option<usize>,
    },
    SyntheticLogistic {
        n: usize,
        p: usize,
        seed: u64,
        /// Norm of the ground-truth weight.
        #[serde(default = "unit_signal")]
        signal: f64,
    },
    SyntheticQuadratic {
        n: usize,
        p: usize,
        mu: f64,
        #[serde(rename = "L")]
        l: f64,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    RowL2Unit,
    MinmaxThenRowL2,
    None,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "row_l2_unit" => Ok(Self::RowL2Unit),
            "minmax_then_row_l2" => Ok(Self::MinmaxThenRowL2),
            "none" => Ok(Self::None),
            other => Err(format!(
                "unknown normalization `{other}` (row_l2_unit, minmax_then_row_l2, none)"
            )),
        }
    }
}

/// How file labels are mapped before use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LabelMode {
    /// `±1` labels are kept, `{0, 1}` become `{-1, +1}`, anything else is
    /// split as class 2 versus the rest.
    #[default]
    Auto,
    Raw,
    OneVsRest { positive: f64 },
}

/// Default positive class when multi-class labels are binarized.
pub const DEFAULT_POSITIVE_CLASS: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub kind: DataKind,
    /// Defaults to `row_l2_unit`, except `none` for synthetic quadratics
    /// whose spectrum would otherwise be destroyed.
    pub normalization: Option<Normalization>,
    #[serde(default)]
    pub labels: LabelMode,
    /// Seeded row subsample taken before normalization.
    pub subsample: Option<usize>,
    #[serde(default)]
    pub subsample_seed: u64,
}

impl DatasetSource {
    pub fn new(kind: DataKind) -> Self {
        Self {
            kind,
            normalization: None,
            labels: LabelMode::Auto,
            subsample: None,
            subsample_seed: 0,
        }
    }

    pub fn effective_normalization(&self) -> Normalization {
        self.normalization.unwrap_or(match self.kind {
            DataKind::SyntheticQuadratic { .. } => Normalization::None,
            _ => Normalization::RowL2Unit,
        })
    }
}

fn unit_signal() -> f64 {
    1.0
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataKind::LibsvmFile { path, .. } | DataKind::CsvFile { path, .. } => {
                write!(f, "{}", path.display())
            }
            DataKind::SyntheticLogistic { n, p, seed, signal } => {
                write!(f, "synth:logistic:n={n},p={p},seed={seed}")?;
                if *signal != 1.0 {
                    write!(f, ",signal={signal}")?;
                }
                Ok(())
            }
            DataKind::SyntheticQuadratic { n, p, mu, l, seed } => {
                write!(f, "synth:quadratic:n={n},p={p},mu={mu},L={l},seed={seed}")
            }
        }
    }
}

/// Parses `synth:logistic:n=..,p=..,seed=..[,signal=..]`,
/// `synth:quadratic:n=..,p=..,mu=..,L=..,seed=..`, or a file path (`.csv`
/// files as CSV, anything else as LIBSVM).
impl FromStr for DataKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("synth:") else {
            let path = PathBuf::from(s);
            let is_csv = path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            return Ok(if is_csv {
                DataKind::CsvFile {
                    path,
                    label_column: None,
                }
            } else {
                DataKind::LibsvmFile { path, dim: None }
            });
        };
        let (family, params) = rest.split_once(':').unwrap_or((rest, ""));
        let mut n = None;
        let mut p = None;
        let mut seed = 0u64;
        let mut mu = None;
        let mut l = None;
        let mut signal = 1.0;
        for pair in params.split(',').filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{pair}`")))?;
            let bad = || Error::InvalidConfig(format!("bad value for `{key}`: `{value}`"));
            match key.trim() {
                "n" => n = Some(value.trim().parse().map_err(|_| bad())?),
                "p" => p = Some(value.trim().parse().map_err(|_| bad())?),
                "seed" => seed = value.trim().parse().map_err(|_| bad())?,
                "mu" => mu = Some(value.trim().parse().map_err(|_| bad())?),
                "L" | "l" => l = Some(value.trim().parse().map_err(|_| bad())?),
                "signal" => signal = value.trim().parse().map_err(|_| bad())?,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown synthetic parameter `{other}`"
                    )))
                }
            }
        }
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidConfig(format!("synthetic dataset needs `{name}`")))
        };
        match family {
            "logistic" => Ok(DataKind::SyntheticLogistic {
                n: need(n, "n")?,
                p: need(p, "p")?,
                seed,
                signal,
            }),
            "quadratic" => Ok(DataKind::SyntheticQuadratic {
                n: need(n, "n")?,
                p: need(p, "p")?,
                mu: mu.ok_or_else(|| Error::InvalidConfig("synthetic quadratic needs `mu`".into()))?,
                l: l.ok_or_else(|| Error::InvalidConfig("synthetic quadratic needs `L`".into()))?,
                seed,
            }),
            other => Err(Error::InvalidConfig(format!(
                "unknown synthetic family `{other}` (logistic, quadratic)"
            ))),
        }
    }
}

pub fn load_dataset(src: &DatasetSource) -> Result<Dataset> {
    let (mut dim, mut features, mut labels) = match &src.kind {
        DataKind::LibsvmFile { path, dim } => read_libsvm(path, *dim)?,
        DataKind::CsvFile { path, label_column } => read_csv(path, *label_column)?,
        DataKind::SyntheticLogistic { n, p, seed, signal } => {
            let d = synth_logistic_with_signal(*n, *p, *signal, *seed)?;
            (d.dim(), flat(&d), d.labels().to_vec())
        }
        DataKind::SyntheticQuadratic { n, p, mu, l, seed } => {
            let d = synth_quadratic(*n, *p, *mu, *l, *seed)?;
            (d.dim(), flat(&d), d.labels().to_vec())
        }
    };
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if matches!(src.kind, DataKind::LibsvmFile { .. } | DataKind::CsvFile { .. }) {
        map_labels(&mut labels, src.labels);
    }
    if let Some(k) = src.subsample {
        if k == 0 {
            return Err(Error::InvalidConfig("subsample must be ≥ 1".into()));
        }
        if k < labels.len() {
            let mut rng = ChaCha20Rng::seed_from_u64(src.subsample_seed);
            let mut idx = sample(&mut rng, labels.len(), k).into_vec();
            idx.sort_unstable();
            features = idx
                .iter()
                .flat_map(|&i| features[i * dim..(i + 1) * dim].iter().copied())
                .collect();
            labels = idx.iter().map(|&i| labels[i]).collect();
        }
    }
    if dim == 0 {
        dim = 1;
        features = vec![0.0; labels.len()];
    }
    normalize(&mut features, dim, src.effective_normalization());
    let data = Dataset::from_parts(dim, features, labels)?;
    info!("loaded {}: n = {}, p = {}", src.kind, data.len(), data.dim());
    Ok(data)
}

fn flat(d: &Dataset) -> Vec<f64> {
    d.rows().flat_map(|(a, _)| a.iter().copied()).collect()
}

fn map_labels(labels: &mut [f64], mode: LabelMode) {
    let positive = match mode {
        LabelMode::Raw => return,
        LabelMode::OneVsRest { positive } => positive,
        LabelMode::Auto => {
            if labels.iter().all(|&y| y == 1.0 || y == -1.0) {
                return;
            }
            if labels.iter().all(|&y| y == 0.0 || y == 1.0) {
                labels.iter_mut().for_each(|y| *y = 2.0 * *y - 1.0);
                return;
            }
            DEFAULT_POSITIVE_CLASS
        }
    };
    labels
        .iter_mut()
        .for_each(|y| *y = if *y == positive { 1.0 } else { -1.0 });
}

fn normalize(features: &mut [f64], dim: usize, mode: Normalization) {
    match mode {
        Normalization::None => {}
        Normalization::RowL2Unit => rows_to_unit(features, dim),
        Normalization::MinmaxThenRowL2 => {
            for j in 0..dim {
                let col = features.iter().skip(j).step_by(dim);
                let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
                let span = hi - lo;
                for v in features.iter_mut().skip(j).step_by(dim) {
                    *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
                }
            }
            rows_to_unit(features, dim);
        }
    }
}

fn rows_to_unit(features: &mut [f64], dim: usize) {
    for row in features.chunks_mut(dim) {
        let norm = norm2(row);
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `label index:value ...` with 1-based, strictly increasing indices.
/// Blank lines and `#` comments are skipped.
pub fn read_libsvm(path: &Path, dim: Option<usize>) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let reader = BufReader::new(open(path)?);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().unwrap_or_default();
        let label: f64 = label_token
            .parse()
            .map_err(|_| parse_error(path, lineno, format!("bad label `{label_token}`")))?;
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_error(path, lineno, format!("expected index:value, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad index `{idx}`")))?;
            if idx == 0 || idx <= last {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("indices must be 1-based and increasing, got {idx} after {last}"),
                ));
            }
            let val: f64 = val
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_error(path, lineno, format!("bad value `{val}`")))?;
            if let Some(d) = dim {
                if idx > d {
                    return Err(parse_error(
                        path,
                        lineno,
                        format!("index {idx} exceeds declared dimension {d}"),
                    ));
                }
            }
            last = idx;
            entries.push((idx, val));
        }
        max_index = max_index.max(last);
        rows.push(entries);
        labels.push(label);
    }
    let dim = dim.unwrap_or(max_index);
    let mut features = vec![0.0; rows.len() * dim];
    for (r, entries) in rows.iter().enumerate() {
        for &(idx, val) in entries {
            features[r * dim + idx - 1] = val;
        }
    }
    Ok((dim, features, labels))
}

/// Numeric CSV. A first record that does not parse as numbers is taken as a
/// header.
pub fn read_csv(path: &Path, label_column: Option<usize>) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let lineno = record.position().map_or(k + 1, |p| p.line() as usize);
        let values: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if k == 0 => continue,
            Err(_) => return Err(parse_error(path, lineno, "non-numeric field")),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_error(path, lineno, "non-finite value"));
        }
        let w = *width.get_or_insert(values.len());
        if values.len() != w {
            return Err(parse_error(
                path,
                lineno,
                format!("expected {w} fields, got {}", values.len()),
            ));
        }
        if w < 2 {
            return Err(parse_error(path, lineno, "need a label column and at least one feature"));
        }
        let col = label_column.unwrap_or(w - 1);
        if col >= w {
            return Err(parse_error(
                path,
                lineno,
                format!("label column {col} out of range for {w} fields"),
            ));
        }
        for (j, v) in values.iter().enumerate() {
            if j == col {
                labels.push(*v);
            } else {
                features.push(*v);
            }
        }
    }
    let dim = width.map_or(0, |w| w - 1);
    Ok((dim, features, labels))
}

fn unit_gaussian<R: Rng>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let norm = norm2(&v);
        if norm > 1e-300 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

fn check_size(n: usize, p: usize) -> Result<()> {
    if n < 2 || p < 1 {
        return Err(invalid(format!("need n ≥ 2 and p ≥ 1, got n = {n}, p = {p}")));
    }
    Ok(())
}

/// The ground-truth weight of [`synth_logistic`] for `p` and `seed`.
pub fn synth_logistic_truth(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    unit_gaussian(p, &mut rng)
}

/// Features uniform on the unit sphere, labels `+1` with probability
/// `σ(⟨w*, a⟩)` for a ground-truth `w*` on the unit sphere.
pub fn synth_logistic(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    synth_logistic_with_signal(n, p, 1.0, seed)
}

/// As [`synth_logistic`] with `‖w*‖ = signal`, which controls how
/// predictable the labels are.
pub fn synth_logistic_with_signal(n: usize, p: usize, signal: f64, seed: u64) -> Result<Dataset> {
    check_size(n, p)?;
    if !(signal >= 0.0 && signal.is_finite()) {
        return Err(invalid(format!("signal must be ≥ 0, got {signal}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let truth: Vec<f64> = unit_gaussian(p, &mut rng).iter().map(|v| signal * v).collect();
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let a = unit_gaussian(p, &mut rng);
        let prob = sigmoid(dot(&truth, &a));
        labels.push(if rng.random::<f64>() < prob { 1.0 } else { -1.0 });
        features.extend_from_slice(&a);
    }
    Dataset::from_parts(p, features, labels)
}

/// Random orthogonal matrix by Gram-Schmidt (two passes) on Gaussian
/// columns; returned as a list of orthonormal vectors.
fn random_orthonormal<R: Rng>(p: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    while basis.len() < p {
        let mut v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let norm = norm2(&v);
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Least-squares instance whose Hessian `(1/n) Σ aᵢaᵢᵀ` has eigenvalues
/// spaced geometrically over `[mu, L]` with random orthonormal eigenvectors. Row `k`
/// is a scaled copy of eigenvector `k mod p`, so `n ≥ p` is required.
/// Targets are `bᵢ = ⟨aᵢ, x_true⟩ + 0.1·N(0, 1)` with `x_true` on the unit
/// sphere.
pub fn synth_quadratic(n: usize, p: usize, mu: f64, l: f64, seed: u64) -> Result<Dataset> {
    check_size(n, p)?;
    if n < p {
        return Err(invalid(format!(
            "synthetic quadratic needs n ≥ p to realize the spectrum (n = {n}, p = {p})"
        )));
    }
    if !(mu > 0.0 && l >= mu && l.is_finite()) {
        return Err(invalid(format!("need 0 < mu ≤ L, got mu = {mu}, L = {l}")));
    }
    if p == 1 && mu != l {
        return Err(invalid("p = 1 admits only mu = L"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let basis = random_orthonormal(p, &mut rng);
    let truth = unit_gaussian(p, &mut rng);
    let eigen: Vec<f64> = (0..p)
        .map(|j| {
            if p == 1 {
                l
            } else {
                mu * (l / mu).powf(j as f64 / (p - 1) as f64)
            }
        })
        .collect();
    let counts: Vec<usize> = (0..p).map(|j| (n - j).div_ceil(p)).collect();
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let j = k % p;
        let scale = (n as f64 * eigen[j] / counts[j] as f64).sqrt();
        let a: Vec<f64> = basis[j].iter().map(|q| scale * q).collect();
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(dot(&a, &truth) + 0.1 * noise);
        features.extend_from_slice(&a);
    }
    Dataset::from_parts(p, features, labels)
}
