//! Differentially private accelerated mirror descent over a convex body.

use serde::{Deserialize, Serialize};

use super::mirror::{MirrorMap, INNER_TOLERANCE};
use crate::error::{ensure_dim, invalid, Error, Result};
use crate::objective::SmoothObjective;
use crate::optimizers::trace::{Recorder, Reference, RunTrace};
use crate::privacy::{add_noise, NoisePlan, PrivacyBudget, RunRng};

/// Which smoothness constant drives the `α_k`, `r_k` schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccMdSchedule {
    /// `L' = L‖C‖₂²`, consistent with measuring distances in `‖·‖_C`.
    #[default]
    Rescaled,
    /// The plain `L` of the algorithm box; only the `α_k`, `r_k` sequence
    /// changes, the y-step still uses `L‖C‖₂²`.
    Unscaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccMdConfig {
    pub iterations: usize,
    pub x0: Vec<f64>,
    pub noise: NoisePlan,
    pub inner_tolerance: f64,
    pub schedule: AccMdSchedule,
}

impl AccMdConfig {
    pub fn new(iterations: usize, x0: Vec<f64>, noise: NoisePlan) -> Self {
        Self {
            iterations,
            x0,
            noise,
            inner_tolerance: INNER_TOLERANCE,
            schedule: AccMdSchedule::Rescaled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("DP-AccMD needs T ≥ 1".into()));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be finite and ≥ 0, got {}",
                self.noise.sigma
            )));
        }
        if !(self.inner_tolerance > 0.0) {
            return Err(Error::InvalidConfig("inner tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// `α_{k+1} = (k+2)/(4L_s)`.
pub fn accmd_alpha(k: usize, schedule_smoothness: f64) -> f64 {
    (k as f64 + 2.0) / (4.0 * schedule_smoothness)
}

/// `r_k = 1/(2α_{k+1}L_s) = 2/(k+2)`.
pub fn accmd_mixing(k: usize, schedule_smoothness: f64) -> f64 {
    1.0 / (2.0 * accmd_alpha(k, schedule_smoothness) * schedule_smoothness)
}

/// Runs `T` iterations and returns `y_T` as the trace's final point. Epoch
/// `k` of the trace is `y_k`.
pub fn dp_accmd<O: SmoothObjective>(
    obj: &O,
    map: &MirrorMap,
    cfg: &AccMdConfig,
    rng: &mut RunRng,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    cfg.validate()?;
    obj.ensure_smooth()?;
    let body = map.body();
    ensure_dim(body.dim, obj.dim())?;
    ensure_dim(body.dim, cfg.x0.len())?;
    if !body.contains(&cfg.x0, 1e-12) {
        return Err(Error::InvalidConfig("x0 must lie in the constraint body".into()));
    }
    let map = map.with_inner_tolerance(cfg.inner_tolerance)?;
    let smoothness = obj.smoothness_bound();
    let diameter = body.l2_diameter();
    let schedule_smoothness = match cfg.schedule {
        AccMdSchedule::Rescaled => smoothness * diameter * diameter,
        AccMdSchedule::Unscaled => smoothness,
    };
    let sigma = cfg.noise.sigma;

    let mut recorder = Recorder::for_smooth(obj, reference);
    let mut y = cfg.x0.clone();
    let mut z = cfg.x0.clone();
    let mut grads = 0u64;
    recorder.record(0, &y, grads);
    for k in 0..cfg.iterations {
        let r = accmd_mixing(k, schedule_smoothness);
        let x: Vec<f64> = z.iter().zip(&y).map(|(zi, yi)| r * zi + (1.0 - r) * yi).collect();
        let g = obj.gradient(&x);
        grads += obj.gradient_cost();
        y = map.smoothed_min_step(&x, &g, smoothness)?;
        let mut noisy = g;
        add_noise(&mut noisy, sigma, rng.noise());
        z = map.mirror_step(&z, &noisy, accmd_alpha(k, schedule_smoothness))?;
        recorder.record(k + 1, &y, grads);
    }
    Ok(recorder.finish("dp_accmd", rng.seed(), &cfg.noise, y, grads, None))
}

/// `T = ceil(√(L‖C‖₂²·√B_w(x*,x₀)·nε / (G√ln(1/δ)·√(G_C² + ‖C‖₂²))))`
/// with the hidden constant set to 1, floored at 1.
pub fn recommend_t_accmd(
    smoothness: f64,
    body_width: f64,
    diameter: f64,
    bregman0: f64,
    n: usize,
    lipschitz: f64,
    budget: &PrivacyBudget,
) -> Result<usize> {
    for (name, v) in [
        ("L", smoothness),
        ("diameter", diameter),
        ("G", lipschitz),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if !(body_width >= 0.0 && bregman0 >= 0.0) {
        return Err(invalid("width and Bregman radius must be ≥ 0"));
    }
    if n == 0 {
        return Err(invalid("n must be ≥ 1"));
    }
    let log_term = (1.0 / budget.delta()).ln();
    let t2 = smoothness * diameter * diameter * bregman0.sqrt() * n as f64 * budget.epsilon()
        / (lipschitz * log_term.sqrt() * (body_width * body_width + diameter * diameter).sqrt());
    Ok((t2.sqrt().ceil() as usize).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::body::ConvexBody;

    struct HalfNormSq(usize);

    impl SmoothObjective for HalfNormSq {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
        fn smoothness_bound(&self) -> f64 {
            1.0
        }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(accmd_alpha(0, 1.0), 0.5);
        assert_eq!(accmd_alpha(2, 0.25), 4.0);
        for k in 0..20 {
            let r = accmd_mixing(k, 3.7);
            assert!((r - 2.0 / (k as f64 + 2.0)).abs() < 1e-15);
        }
        assert_eq!(accmd_mixing(0, 5.0), 1.0);
    }

    #[test]
    fn unscaled_first_step_trace() {
        let map = MirrorMap::for_body(ConvexBody::l2_ball(2, 1.0)).unwrap();
        let mut cfg = AccMdConfig::new(1, vec![1.0, 0.0], NoisePlan::off(1, 1.0));
        cfg.schedule = AccMdSchedule::Unscaled;
        let trace = dp_accmd(&HalfNormSq(2), &map, &cfg, &mut RunRng::new(0), None).unwrap();
        assert_eq!(trace.final_point, vec![0.75, 0.0]);
        assert_eq!(trace.records.len(), 2);
        assert_eq!(trace.sample_gradients, 1);
    }

    #[test]
    fn rejects_infeasible_start() {
        let map = MirrorMap::for_body(ConvexBody::l2_ball(2, 1.0)).unwrap();
        let cfg = AccMdConfig::new(3, vec![1.0, 1.0], NoisePlan::off(3, 1.0));
        let err = dp_accmd(&HalfNormSq(2), &map, &cfg, &mut RunRng::new(0), None).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let cfg = AccMdConfig::new(0, vec![0.0, 0.0], NoisePlan::off(1, 1.0));
        assert!(dp_accmd(&HalfNormSq(2), &map, &cfg, &mut RunRng::new(0), None).is_err());
    }

    #[test]
    fn recommend_t_plug_in() {
        let budget = PrivacyBudget::new(1.0, (-1.0f64).exp()).unwrap();
        assert_eq!(recommend_t_accmd(1.0, 0.0, 1.0, 1.0, 100, 1.0, &budget).unwrap(), 10);
        let t400 = recommend_t_accmd(1.0, 0.0, 1.0, 1.0, 400, 1.0, &budget).unwrap();
        assert_eq!(t400, 20);
        let wide = recommend_t_accmd(1.0, 5.0, 1.0, 1.0, 10_000, 1.0, &budget).unwrap();
        let narrow = recommend_t_accmd(1.0, 1.0, 1.0, 1.0, 10_000, 1.0, &budget).unwrap();
        assert!(wide < narrow);
        assert_eq!(recommend_t_accmd(1.0, 0.0, 1.0, 0.0, 100, 1.0, &budget).unwrap(), 1);
    }
}
