//! The ERM objective `F^r(x, D) = (1/n) Σ f(x, z_i) + r(x)`.
//!
//! Losses are generalized linear: every per-sample loss depends on `x` only
//! through the margin `⟨x, a_i⟩`, so each per-sample gradient is a scalar
//! multiple of the feature vector. The logistic loss is the standard
//! `log(1 + exp(-y⟨x, a⟩))`; per-sample gradients are never clipped, the
//! Lipschitz bound comes from row normalization of the data.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::{axpy, dot, norm1, norm2, norm2_sq};

/// Slack allowed when deciding whether data is row-normalized.
const NORMALIZED_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub features: Vec<f64>,
    pub label: f64,
}

impl DataPoint {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

/// Row-major dense dataset with a fixed feature dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyDataset)?.features.len();
        let mut features = Vec::with_capacity(points.len() * dim);
        let mut labels = Vec::with_capacity(points.len());
        for p in points {
            ensure_dim(dim, p.features.len())?;
            features.extend_from_slice(&p.features);
            labels.push(p.label);
        }
        Self::from_parts(dim, features, labels)
    }

    /// Builds a dataset from a flat row-major feature buffer.
    pub fn from_parts(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(invalid("feature dimension must be at least 1"));
        }
        ensure_dim(labels.len() * dim, features.len())?;
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        Ok(Self {
            dim,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> DataPoint {
        DataPoint::new(self.row(i).to_vec(), self.labels[i])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features
            .chunks_exact(self.dim)
            .zip(self.labels.iter().copied())
    }

    pub fn max_row_norm(&self) -> f64 {
        self.rows().fold(0.0, |m, (a, _)| m.max(norm2(a)))
    }

    /// Selects the given rows, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    n: self.len(),
                });
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::from_parts(self.dim, features, labels)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `log(1 + exp(-y⟨x, a⟩))`, labels ±1.
    Logistic,
    /// `½(⟨x, a⟩ - b)²`.
    Squared,
}

/// Loss together with its Lipschitz (`G`) and smoothness (`L`) constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    pub lipschitz: f64,
    pub smoothness: f64,
}

#[inline]
pub(crate) fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LossKind {
    #[inline]
    pub fn value(self, margin: f64, label: f64) -> f64 {
        match self {
            LossKind::Logistic => softplus(-label * margin),
            LossKind::Squared => 0.5 * (margin - label) * (margin - label),
        }
    }

    /// Derivative of the loss with respect to the margin.
    #[inline]
    pub fn derivative(self, margin: f64, label: f64) -> f64 {
        match self {
            LossKind::Logistic => -label * sigmoid(-label * margin),
            LossKind::Squared => margin - label,
        }
    }

    /// `value(m1, y) - value(m2, y)` evaluated from `m1 - m2` without
    /// catastrophic cancellation.
    #[inline]
    fn value_difference(self, margin_delta: f64, reference_margin: f64, label: f64) -> f64 {
        match self {
            LossKind::Logistic => {
                let v = -label * reference_margin;
                let d = -label * margin_delta;
                (sigmoid(v) * d.exp_m1()).ln_1p()
            }
            LossKind::Squared => {
                let r = reference_margin - label;
                0.5 * margin_delta * (margin_delta + 2.0 * r)
            }
        }
    }
}

/// Lipschitz / smoothness constants derived from the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConstants {
    pub lipschitz: f64,
    pub smoothness: f64,
    /// Whether every row had `‖a‖₂ ≤ 1`.
    pub normalized: bool,
}

/// Derives `(G, L)` from the actual row norms.
///
/// Logistic: `G = max‖a‖`, `L = max‖a‖²/4`. Squared: `L = max‖a‖²` and `G`
/// bounds the gradient norm over the ball of radius `domain_radius`, i.e.
/// `max ‖a‖(‖a‖ R + |b|)`.
pub fn derive_constants(data: &Dataset, kind: LossKind, domain_radius: f64) -> LossConstants {
    let mut max_norm: f64 = 0.0;
    let mut max_grad: f64 = 0.0;
    for (a, b) in data.rows() {
        let na = norm2(a);
        max_norm = max_norm.max(na);
        max_grad = max_grad.max(na * (na * domain_radius + b.abs()));
    }
    let normalized = max_norm <= 1.0 + NORMALIZED_SLACK;
    if !normalized {
        warn!("features are not row-normalized (max norm {max_norm:.6}); constants use actual norms");
    }
    let (lipschitz, smoothness) = match kind {
        LossKind::Logistic => (max_norm, max_norm * max_norm / 4.0),
        LossKind::Squared => (max_grad, max_norm * max_norm),
    };
    LossConstants {
        lipschitz,
        smoothness,
        normalized,
    }
}

/// Proximable regularizer `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    None,
    /// `(λ/2)‖x‖²`
    SquaredL2 { lambda: f64 },
    /// `λ‖x‖₁`
    L1 { lambda: f64 },
    /// 0 on the body, +∞ outside.
    Indicator { body: ConvexBody },
}

impl Regularizer {
    pub fn validate(&self) -> Result<()> {
        match self {
            Regularizer::SquaredL2 { lambda } | Regularizer::L1 { lambda }
                if !(lambda.is_finite() && *lambda >= 0.0) =>
            {
                Err(invalid(format!("regularization weight must be ≥ 0, got {lambda}")))
            }
            Regularizer::Indicator { body } => body.validate(),
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::SquaredL2 { lambda } => 0.5 * lambda * norm2_sq(x),
            Regularizer::L1 { lambda } => lambda * norm1(x),
            Regularizer::Indicator { body } => {
                if body.contains(x, 1e-12) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Strong convexity modulus contributed by the regularizer.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            Regularizer::SquaredL2 { lambda } => *lambda,
            _ => 0.0,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Regularizer::None | Regularizer::SquaredL2 { .. })
    }

    /// `argmin_x ½‖x - y‖² + step·r(x)`.
    pub fn prox(&self, step: f64, y: &[f64]) -> Result<Vec<f64>> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(invalid(format!("prox step must be > 0, got {step}")));
        }
        let mut out = y.to_vec();
        self.prox_in_place(step, &mut out);
        Ok(out)
    }

    pub(crate) fn prox_in_place(&self, step: f64, y: &mut [f64]) {
        match self {
            Regularizer::None => {}
            Regularizer::SquaredL2 { lambda } => {
                let s = 1.0 / (1.0 + step * lambda);
                y.iter_mut().for_each(|v| *v *= s);
            }
            Regularizer::L1 { lambda } => {
                let t = step * lambda;
                y.iter_mut().for_each(|v| *v = soft_threshold(*v, t));
            }
            Regularizer::Indicator { body } => body.project_in_place(y),
        }
    }
}

#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Anything with a value and a full gradient that the first-order methods can
/// run on.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// A Lipschitz constant of `gradient`.
    fn smoothness_bound(&self) -> f64;

    /// Number of per-sample gradient evaluations one `gradient` call costs.
    fn gradient_cost(&self) -> u64 {
        1
    }

    /// Rejects objectives whose non-smooth part would make `gradient`
    /// meaningless.
    fn ensure_smooth(&self) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ErmObjective {
    data: Dataset,
    loss: LossModel,
    regularizer: Regularizer,
    strong_convexity: f64,
}

impl ErmObjective {
    /// Builds the objective with constants derived from the data (domain
    /// radius 1 for the squared loss) and `μ` taken from the regularizer.
    pub fn new(data: Dataset, kind: LossKind, regularizer: Regularizer) -> Result<Self> {
        let constants = derive_constants(&data, kind, 1.0);
        let loss = LossModel {
            kind,
            lipschitz: constants.lipschitz,
            smoothness: constants.smoothness,
        };
        Self::with_loss(data, loss, regularizer)
    }

    pub fn with_loss(data: Dataset, loss: LossModel, regularizer: Regularizer) -> Result<Self> {
        regularizer.validate()?;
        if let Regularizer::Indicator { body } = &regularizer {
            ensure_dim(data.dim(), body.dim())?;
        }
        if !(loss.smoothness > 0.0 && loss.lipschitz >= 0.0) {
            return Err(invalid(format!(
                "loss constants must satisfy L > 0, G ≥ 0 (got L = {}, G = {})",
                loss.smoothness, loss.lipschitz
            )));
        }
        let strong_convexity = regularizer.strong_convexity();
        Ok(Self {
            data,
            loss,
            regularizer,
            strong_convexity,
        })
    }

    /// Overrides `μ`, e.g. when strong convexity comes from the loss.
    pub fn with_strong_convexity(mut self, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!("strong convexity must be ≥ 0, got {mu}")));
        }
        self.strong_convexity = mu;
        Ok(self)
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.loss.lipschitz
    }

    pub fn smoothness(&self) -> f64 {
        self.loss.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// `κ = L/μ`, when `μ > 0`.
    pub fn condition_number(&self) -> Option<f64> {
        (self.strong_convexity > 0.0).then(|| self.loss.smoothness / self.strong_convexity)
    }

    /// `F(x, D)`, the data term only.
    pub fn loss_value(&self, x: &[f64]) -> f64 {
        let kind = self.loss.kind;
        let total: f64 = self
            .data
            .rows()
            .map(|(a, y)| kind.value(dot(a, x), y))
            .sum();
        total / self.n() as f64
    }

    /// `F^r(x, D)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.loss_value(x) + self.regularizer.value(x)
    }

    /// `F^r(x) - F^r(y)`, accurate even when the two values agree to many
    /// digits.
    pub fn value_difference(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        ensure_dim(self.dim(), x.len())?;
        ensure_dim(self.dim(), y.len())?;
        let kind = self.loss.kind;
        let delta: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let total: f64 = self
            .data
            .rows()
            .map(|(a, label)| kind.value_difference(dot(a, &delta), dot(a, y), label))
            .sum();
        let reg = match &self.regularizer {
            Regularizer::None => 0.0,
            Regularizer::SquaredL2 { lambda } => {
                0.5 * lambda * x.iter().zip(y).map(|(a, b)| (a - b) * (a + b)).sum::<f64>()
            }
            r => r.value(x) - r.value(y),
        };
        Ok(total / self.n() as f64 + reg)
    }

    /// `F^r(x) - f_star`.
    pub fn excess_risk(&self, x: &[f64], f_star: f64) -> f64 {
        self.value(x) - f_star
    }

    /// `∇f(x, z_i)`.
    pub fn sample_gradient(&self, x: &[f64], i: usize) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        let mut out = vec![0.0; self.dim()];
        self.add_sample_gradient(x, i, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale · ∇f(x, z_i)`; no bounds checks.
    #[inline]
    pub(crate) fn add_sample_gradient(&self, x: &[f64], i: usize, scale: f64, out: &mut [f64]) {
        let a = self.data.row(i);
        let coef = self.loss.kind.derivative(dot(a, x), self.data.label(i));
        axpy(scale * coef, a, out);
    }

    /// `∇F(x, D) = (1/n) Σ_i ∇f(x, z_i)`, accumulated in index order.
    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.dim(), x.len())?;
        Ok(self.full_gradient_unchecked(x))
    }

    pub(crate) fn full_gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for i in 0..self.n() {
            self.add_sample_gradient(x, i, 1.0, &mut out);
        }
        let inv = 1.0 / self.n() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        out
    }

    /// Gradient of the smooth part `F + r` (regularizer must be smooth).
    pub fn smooth_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.ensure_smooth()?;
        let mut g = self.full_gradient(x)?;
        if let Regularizer::SquaredL2 { lambda } = self.regularizer {
            axpy(lambda, x, &mut g);
        }
        Ok(g)
    }

    /// Norm of the prox-gradient mapping `(x - prox_{ηr}(x - η∇F(x)))/η`.
    pub fn gradient_mapping_norm(&self, x: &[f64], step: f64) -> Result<f64> {
        let g = self.full_gradient(x)?;
        let mut y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        self.regularizer.prox_in_place(step, &mut y);
        Ok(x.iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / step)
    }
}

impl SmoothObjective for ErmObjective {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        ErmObjective::value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.full_gradient_unchecked(x);
        if let Regularizer::SquaredL2 { lambda } = self.regularizer {
            axpy(lambda, x, &mut g);
        }
        g
    }

    fn smoothness_bound(&self) -> f64 {
        match self.regularizer {
            Regularizer::SquaredL2 { lambda } => self.loss.smoothness + lambda,
            _ => self.loss.smoothness,
        }
    }

    fn gradient_cost(&self) -> u64 {
        self.n() as u64
    }

    fn ensure_smooth(&self) -> Result<()> {
        if self.regularizer.is_smooth() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "regularizer is not smooth; use dp_svrg (prox) or dp_accmd (constraint) instead"
                    .into(),
            ))
        }
    }
}
