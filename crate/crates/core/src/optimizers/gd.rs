//! DP-GD: full-gradient descent with Gaussian noise on every gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{Recorder, Reference, RunTrace};
use crate::error::{ensure_dim, Error, Result};
use crate::objective::SmoothObjective;
use crate::privacy::{add_noise, NoisePlan, RunRng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    #[default]
    LastIterate,
    /// A uniformly drawn iterate from `{x_0, …, x_{T-1}}`.
    UniformIterate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub iterations: usize,
    pub eta: f64,
    pub x0: Vec<f64>,
    pub noise: NoisePlan,
    pub output: OutputMode,
}

impl GdConfig {
    pub fn validate(&self, smoothness: f64, dim: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("DP-GD needs T ≥ 1".into()));
        }
        if !(self.eta > 0.0 && self.eta <= (1.0 + 1e-12) / smoothness) {
            return Err(Error::InvalidConfig(format!(
                "step size must lie in (0, 1/L] = (0, {}], got {}",
                1.0 / smoothness,
                self.eta
            )));
        }
        if !(self.noise.sigma >= 0.0 && self.noise.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be finite and ≥ 0, got {}",
                self.noise.sigma
            )));
        }
        ensure_dim(dim, self.x0.len())
    }
}

/// Runs `x_t = x_{t-1} - η(∇F(x_{t-1}) + z_{t-1})`. Trace epoch `t` is
/// `x_t`; the final point follows `cfg.output`, and in uniform mode the drawn
/// index comes from the output stream before the first step.
pub fn dp_gd<O: SmoothObjective>(
    obj: &O,
    cfg: &GdConfig,
    rng: &mut RunRng,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    obj.ensure_smooth()?;
    cfg.validate(obj.smoothness_bound(), obj.dim())?;
    let pick = match cfg.output {
        OutputMode::LastIterate => None,
        OutputMode::UniformIterate => Some(rng.output().random_range(0..cfg.iterations)),
    };
    let mut recorder = Recorder::for_smooth(obj, reference);
    let mut x = cfg.x0.clone();
    let mut picked = None;
    let mut grads = 0u64;
    recorder.record(0, &x, grads);
    for t in 0..cfg.iterations {
        if pick == Some(t) {
            picked = Some(x.clone());
        }
        let mut g = obj.gradient(&x);
        grads += obj.gradient_cost();
        add_noise(&mut g, cfg.noise.sigma, rng.noise());
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= cfg.eta * gi;
        }
        recorder.record(t + 1, &x, grads);
    }
    let out = picked.unwrap_or(x);
    Ok(recorder.finish("dp_gd", rng.seed(), &cfg.noise, out, grads, pick))
}
