//! DP-SVRG and DP-SVRG++: proximal SVRG with Gaussian noise on every inner
//! direction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{Recorder, Reference, RunTrace};
use crate::error::{ensure_dim, Error, Result};
use crate::objective::ErmObjective;
use crate::privacy::{add_noise, NoisePlan, RunRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgConfig {
    /// Outer epochs `T`.
    pub epochs: usize,
    /// Inner iterations per epoch `m`.
    pub inner_steps: usize,
    pub eta: f64,
    pub x0: Vec<f64>,
    pub noise: NoisePlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgPpConfig {
    pub epochs: usize,
    /// Base inner count; epoch `s` runs `2^s m` steps.
    pub base_inner_steps: usize,
    pub eta: f64,
    pub x0: Vec<f64>,
    pub noise: NoisePlan,
}

fn check_common(eta: f64, x0: &[f64], noise: &NoisePlan, obj: &ErmObjective) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidConfig(format!("step size must be > 0, got {eta}")));
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be finite and ≥ 0, got {}",
            noise.sigma
        )));
    }
    ensure_dim(obj.dim(), x0.len())?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("x0 must be finite".into()));
    }
    Ok(())
}

impl SvrgConfig {
    pub fn validate(&self, obj: &ErmObjective) -> Result<()> {
        if self.epochs == 0 || self.inner_steps == 0 {
            return Err(Error::InvalidConfig("DP-SVRG needs T ≥ 1 and m ≥ 1".into()));
        }
        check_common(self.eta, &self.x0, &self.noise, obj)
    }

    /// `T(n + 2m)`.
    pub fn sample_gradient_cost(&self, n: usize) -> u64 {
        self.epochs as u64 * (n as u64 + 2 * self.inner_steps as u64)
    }
}

impl SvrgPpConfig {
    pub fn validate(&self, obj: &ErmObjective) -> Result<()> {
        if self.epochs == 0 || self.base_inner_steps == 0 {
            return Err(Error::InvalidConfig("DP-SVRG++ needs T ≥ 1 and m ≥ 1".into()));
        }
        crate::privacy::svrg_pp_total_steps(self.epochs, self.base_inner_steps)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        check_common(self.eta, &self.x0, &self.noise, obj)
    }

    /// `2^s m`.
    pub fn epoch_steps(&self, s: usize) -> usize {
        self.base_inner_steps << s
    }

    /// `Σ_{s=1..T} (n + 2·2^s m)`.
    pub fn sample_gradient_cost(&self, n: usize) -> u64 {
        (1..=self.epochs)
            .map(|s| n as u64 + 2 * self.epoch_steps(s) as u64)
            .sum()
    }
}

/// Per-sample gradient oracle that counts its evaluations.
struct CountingOracle<'a> {
    obj: &'a ErmObjective,
    evaluations: u64,
}

impl<'a> CountingOracle<'a> {
    fn new(obj: &'a ErmObjective) -> Self {
        Self { obj, evaluations: 0 }
    }

    fn full_gradient(&mut self, x: &[f64]) -> Vec<f64> {
        self.evaluations += self.obj.n() as u64;
        self.obj.full_gradient_unchecked(x)
    }

    fn add_sample_gradient(&mut self, x: &[f64], i: usize, scale: f64, out: &mut [f64]) {
        self.evaluations += 1;
        self.obj.add_sample_gradient(x, i, scale, out);
    }
}

/// `v = ∇f(x, z_i) - ∇f(x̃, z_i) + ṽ + u`.
pub fn variance_reduced_direction(
    obj: &ErmObjective,
    x: &[f64],
    snapshot: &[f64],
    snapshot_gradient: &[f64],
    i: usize,
    noise: &[f64],
) -> Result<Vec<f64>> {
    let p = obj.dim();
    for len in [x.len(), snapshot.len(), snapshot_gradient.len(), noise.len()] {
        ensure_dim(p, len)?;
    }
    if i >= obj.n() {
        return Err(Error::IndexOutOfRange { index: i, n: obj.n() });
    }
    let mut v = vec![0.0; p];
    obj.add_sample_gradient(x, i, 1.0, &mut v);
    obj.add_sample_gradient(snapshot, i, -1.0, &mut v);
    for ((vi, g), u) in v.iter_mut().zip(snapshot_gradient).zip(noise) {
        *vi += g + u;
    }
    Ok(v)
}

/// Runs `steps` noisy prox steps from `x` (updated in place) against the
/// snapshot and returns the running mean of the iterates `x_1..x_steps`.
#[allow(clippy::too_many_arguments)]
fn inner_loop(
    oracle: &mut CountingOracle<'_>,
    x: &mut [f64],
    snapshot: &[f64],
    snapshot_gradient: &[f64],
    steps: usize,
    eta: f64,
    sigma: f64,
    rng: &mut RunRng,
) -> Vec<f64> {
    let n = oracle.obj.n();
    let regularizer = oracle.obj.regularizer();
    let mut v = vec![0.0; x.len()];
    let mut mean = vec![0.0; x.len()];
    for t in 1..=steps {
        let i = rng.index().random_range(0..n);
        v.fill(0.0);
        oracle.add_sample_gradient(x, i, 1.0, &mut v);
        oracle.add_sample_gradient(snapshot, i, -1.0, &mut v);
        for (vi, g) in v.iter_mut().zip(snapshot_gradient) {
            *vi += g;
        }
        add_noise(&mut v, sigma, rng.noise());
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi -= eta * vi;
        }
        regularizer.prox_in_place(eta, x);
        let w = 1.0 / t as f64;
        for (mi, xi) in mean.iter_mut().zip(x.iter()) {
            *mi += w * (xi - *mi);
        }
    }
    mean
}

/// DP-SVRG. Every epoch restarts the inner loop at the previous epoch
/// average; trace epoch `s` is `x̃_s`, with `x̃_0 = x0`.
pub fn dp_svrg(
    obj: &ErmObjective,
    cfg: &SvrgConfig,
    rng: &mut RunRng,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    cfg.validate(obj)?;
    let mut oracle = CountingOracle::new(obj);
    let mut recorder = Recorder::for_erm(obj, reference);
    let sigma = cfg.noise.sigma;
    let mut snapshot = cfg.x0.clone();
    recorder.record(0, &snapshot, 0);
    for s in 1..=cfg.epochs {
        let snapshot_gradient = oracle.full_gradient(&snapshot);
        let mut x = snapshot.clone();
        snapshot = inner_loop(
            &mut oracle,
            &mut x,
            &snapshot,
            &snapshot_gradient,
            cfg.inner_steps,
            cfg.eta,
            sigma,
            rng,
        );
        recorder.record(s, &snapshot, oracle.evaluations);
    }
    let used = oracle.evaluations;
    Ok(recorder.finish("dp_svrg", rng.seed(), &cfg.noise, snapshot, used, None))
}

/// DP-SVRG++. Epoch `s` runs `2^s m` steps from the last iterate of epoch
/// `s - 1` against the snapshot `x̃_{s-1}` and outputs its in-epoch average.
pub fn dp_svrg_pp(
    obj: &ErmObjective,
    cfg: &SvrgPpConfig,
    rng: &mut RunRng,
    reference: Option<&Reference>,
) -> Result<RunTrace> {
    cfg.validate(obj)?;
    let mut oracle = CountingOracle::new(obj);
    let mut recorder = Recorder::for_erm(obj, reference);
    let sigma = cfg.noise.sigma;
    let mut snapshot = cfg.x0.clone();
    let mut x = cfg.x0.clone();
    recorder.record(0, &snapshot, 0);
    for s in 1..=cfg.epochs {
        let snapshot_gradient = oracle.full_gradient(&snapshot);
        snapshot = inner_loop(
            &mut oracle,
            &mut x,
            &snapshot,
            &snapshot_gradient,
            cfg.epoch_steps(s),
            cfg.eta,
            sigma,
            rng,
        );
        recorder.record(s, &snapshot, oracle.evaluations);
    }
    let used = oracle.evaluations;
    Ok(recorder.finish("dp_svrg_pp", rng.seed(), &cfg.noise, snapshot, used, None))
}
