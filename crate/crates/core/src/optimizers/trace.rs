use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::linalg::norm2_sq;
use crate::objective::{ErmObjective, Regularizer, SmoothObjective};
use crate::privacy::{NoiseMode, NoisePlan};

/// Reference optimum used to report excess risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub point: Vec<f64>,
    pub value: f64,
    /// Stationarity residual the reference solver stopped at.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub excess_risk: Option<f64>,
    pub grad_norm_sq: f64,
    /// Cumulative per-sample gradient evaluations made by the algorithm.
    pub sample_gradients: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub algorithm: String,
    pub seed: u64,
    pub sigma: f64,
    pub noise_mode: NoiseMode,
    /// The run was recalibrated from moments to advanced mode.
    pub noise_fell_back: bool,
    pub records: Vec<EpochRecord>,
    pub final_point: Vec<f64>,
    pub sample_gradients: u64,
    /// Iterate index returned by DP-GD's uniform output mode.
    pub output_index: Option<usize>,
}

impl RunTrace {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn final_excess_risk(&self) -> Option<f64> {
        self.final_record().and_then(|r| r.excess_risk)
    }
}

pub(crate) struct Metrics {
    objective: f64,
    excess_risk: Option<f64>,
    grad_norm_sq: f64,
}

/// Collects per-epoch metrics. Probing is done outside the algorithm's
/// gradient budget and never touches its random streams.
pub(crate) struct Recorder<'a> {
    probe: Box<dyn Fn(&[f64]) -> Metrics + 'a>,
    start: Instant,
    records: Vec<EpochRecord>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn for_erm(obj: &'a ErmObjective, reference: Option<&'a Reference>) -> Self {
        let probe = move |x: &[f64]| {
            let objective = obj.value(x);
            let excess_risk = reference.map(|r| {
                obj.value_difference(x, &r.point)
                    .map(|d| d + (obj.value(&r.point) - r.value))
                    .unwrap_or(objective - r.value)
            });
            let grad_norm_sq = match obj.regularizer() {
                Regularizer::None | Regularizer::SquaredL2 { .. } => {
                    norm2_sq(&SmoothObjective::gradient(obj, x))
                }
                _ => {
                    let step = 1.0 / obj.smoothness();
                    obj.gradient_mapping_norm(x, step).map_or(f64::NAN, |g| g * g)
                }
            };
            Metrics {
                objective,
                excess_risk,
                grad_norm_sq,
            }
        };
        Self::new(Box::new(probe))
    }

    pub(crate) fn for_smooth<O: SmoothObjective>(obj: &'a O, reference: Option<&'a Reference>) -> Self {
        let probe = move |x: &[f64]| {
            let objective = obj.value(x);
            Metrics {
                objective,
                excess_risk: reference.map(|r| objective - r.value),
                grad_norm_sq: norm2_sq(&obj.gradient(x)),
            }
        };
        Self::new(Box::new(probe))
    }

    fn new(probe: Box<dyn Fn(&[f64]) -> Metrics + 'a>) -> Self {
        Self {
            probe,
            start: Instant::now(),
            records: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, epoch: usize, x: &[f64], sample_gradients: u64) {
        let m = (self.probe)(x);
        self.records.push(EpochRecord {
            epoch,
            objective: m.objective,
            excess_risk: m.excess_risk,
            grad_norm_sq: m.grad_norm_sq,
            sample_gradients,
            wall_ms: self.start.elapsed().as_secs_f64() * 1e3,
        });
    }

    pub(crate) fn finish(
        self,
        algorithm: &str,
        seed: u64,
        noise: &NoisePlan,
        final_point: Vec<f64>,
        sample_gradients: u64,
        output_index: Option<usize>,
    ) -> RunTrace {
        RunTrace {
            algorithm: algorithm.to_string(),
            seed,
            sigma: noise.sigma,
            noise_mode: noise.mode,
            noise_fell_back: noise.fell_back,
            records: self.records,
            final_point,
            sample_gradients,
            output_index,
        }
    }
}
