//! Noise calibration for the gradient-perturbation methods and the noise
//! sampler.
//!
//! The moments-accountant formulas carry an unspecified constant `c` (and a
//! range constant `c₁`); both default to 1, so plans built in that mode are
//! constant-dependent. The advanced-composition mode (`c₂`, default 1) is the
//! explicit fallback and has no range restriction on ε.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// The hidden constants of the calibration formulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConstants {
    /// Multiplier in the moments-accountant σ².
    pub c: f64,
    /// Range constant: moments mode is only valid for ε ≤ c₁·queries/n².
    pub c1: f64,
    /// Multiplier in the advanced-composition σ².
    pub c2: f64,
}

impl Default for CalibrationConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

impl CalibrationConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("c1", self.c1), ("c2", self.c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("constant {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    Moments { c: f64 },
    Advanced { c2: f64 },
    Off,
}

impl NoiseMode {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseMode::Moments { .. } => "moments",
            NoiseMode::Advanced { .. } => "advanced",
            NoiseMode::Off => "off",
        }
    }
}

/// Calibrated per-coordinate noise for one optimizer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisePlan {
    pub sigma: f64,
    pub mode: NoiseMode,
    pub total_queries: u64,
    /// `q = 1/n` for per-sample queries, 1 for full-gradient queries.
    pub sampling_ratio: f64,
    /// False when the moments-mode ε-range precondition fails.
    pub valid: bool,
    pub diagnostic: Option<String>,
    /// Set when a moments plan was replaced by an advanced one.
    pub fell_back: bool,
}

impl NoisePlan {
    pub fn off(total_queries: u64, sampling_ratio: f64) -> Self {
        Self {
            sigma: 0.0,
            mode: NoiseMode::Off,
            total_queries,
            sampling_ratio,
            valid: true,
            diagnostic: None,
            fell_back: false,
        }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn is_off(&self) -> bool {
        matches!(self.mode, NoiseMode::Off)
    }

    fn moments(variance: f64, c: f64, total_queries: u64, sampling_ratio: f64) -> Self {
        Self {
            sigma: variance.sqrt(),
            mode: NoiseMode::Moments { c },
            total_queries,
            sampling_ratio,
            valid: true,
            diagnostic: None,
            fell_back: false,
        }
    }

    fn check_range(mut self, epsilon: f64, limit: f64) -> Self {
        if epsilon > limit {
            self.valid = false;
            self.diagnostic = Some(format!(
                "epsilon {epsilon} exceeds the moments-accountant range c1*queries/n^2 = {limit:e}; \
                 use advanced calibration"
            ));
        }
        self
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be > 0, got {v}")))
    }
}

fn at_least_one(name: &str, v: u64) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be ≥ 1")))
    }
}

fn scale_term(g: f64, n: usize, budget: &PrivacyBudget) -> f64 {
    let n = n as f64;
    g * g / (n * n * budget.epsilon * budget.epsilon)
}

/// DP-SVRG: `σ² = c G² T m ln(1/δ) / (n² ε²)`, valid for `ε ≤ c₁ T m / n²`.
pub fn calibrate_svrg(
    lipschitz: f64,
    epochs: usize,
    inner_steps: usize,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    positive("G", lipschitz)?;
    at_least_one("T", epochs as u64)?;
    at_least_one("m", inner_steps as u64)?;
    at_least_one("n", n as u64)?;
    constants.validate()?;
    let queries = (epochs as u64)
        .checked_mul(inner_steps as u64)
        .ok_or_else(|| invalid("T·m overflows"))?;
    let q = queries as f64;
    let variance = constants.c * scale_term(lipschitz, n, budget) * q * (1.0 / budget.delta).ln();
    let limit = constants.c1 * q / (n as f64 * n as f64);
    Ok(NoisePlan::moments(variance, constants.c, queries, 1.0 / n as f64)
        .check_range(budget.epsilon, limit))
}

/// DP-SVRG++: `σ² = c G² 2^T m ln(2/δ) / (n² ε²)`, valid for `ε ≤ c₁ 2^T m / n²`.
/// Total queries are `(2^{T+1} - 2) m`.
pub fn calibrate_svrg_pp(
    lipschitz: f64,
    epochs: usize,
    base_inner_steps: usize,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    positive("G", lipschitz)?;
    at_least_one("m", base_inner_steps as u64)?;
    at_least_one("n", n as u64)?;
    constants.validate()?;
    let queries = svrg_pp_total_steps(epochs, base_inner_steps)?;
    let growth = 2f64.powi(epochs as i32) * base_inner_steps as f64;
    let variance =
        constants.c * scale_term(lipschitz, n, budget) * growth * (2.0 / budget.delta).ln();
    let limit = constants.c1 * growth / (n as f64 * n as f64);
    Ok(NoisePlan::moments(variance, constants.c, queries, 1.0 / n as f64)
        .check_range(budget.epsilon, limit))
}

/// `Σ_{s=1..T} 2^s m = (2^{T+1} - 2) m`, with overflow checks.
pub fn svrg_pp_total_steps(epochs: usize, base_inner_steps: usize) -> Result<u64> {
    let overflow = || invalid(format!("2^(T+1)·m overflows for T = {epochs}"));
    let shift = epochs
        .checked_add(1)
        .filter(|&s| s < 64)
        .ok_or_else(overflow)?;
    let pow = 1u64 << shift;
    (pow - 2)
        .checked_mul(base_inner_steps as u64)
        .ok_or_else(overflow)
}

/// DP-AccMD and DP-GD: `σ² = c G² T ln(1/δ) / (n² ε²)`, no ε-range condition.
pub fn calibrate_full_gradient(
    lipschitz: f64,
    iterations: usize,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    positive("G", lipschitz)?;
    at_least_one("T", iterations as u64)?;
    at_least_one("n", n as u64)?;
    constants.validate()?;
    let variance = constants.c
        * scale_term(lipschitz, n, budget)
        * iterations as f64
        * (1.0 / budget.delta).ln();
    Ok(NoisePlan::moments(variance, constants.c, iterations as u64, 1.0))
}

/// Advanced composition with sampling amplification:
/// `σ² = c₂ G² T ln(T/δ) ln(1/δ) / (n² ε²)` where `T` counts every noisy query.
pub fn calibrate_advanced(
    lipschitz: f64,
    total_queries: u64,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    positive("G", lipschitz)?;
    at_least_one("T", total_queries)?;
    at_least_one("n", n as u64)?;
    constants.validate()?;
    let t = total_queries as f64;
    let variance = constants.c2
        * scale_term(lipschitz, n, budget)
        * t
        * (t / budget.delta).ln()
        * (1.0 / budget.delta).ln();
    Ok(NoisePlan {
        sigma: variance.sqrt(),
        mode: NoiseMode::Advanced { c2: constants.c2 },
        total_queries,
        sampling_ratio: 1.0 / n as f64,
        valid: true,
        diagnostic: None,
        fell_back: false,
    })
}

/// Classical Gaussian mechanism: `σ = √(2 ln(1.25/δ)) Δ₂ / ε`.
pub fn gaussian_mechanism_sigma(sensitivity: f64, budget: &PrivacyBudget) -> Result<f64> {
    positive("sensitivity", sensitivity)?;
    let log_term = (1.25 / budget.delta).ln();
    if log_term <= 0.0 {
        return Err(invalid("ln(1.25/δ) must be positive"));
    }
    Ok((2.0 * log_term).sqrt() * sensitivity / budget.epsilon)
}

/// `dim` independent draws from `N(0, σ²)`.
pub fn sample_noise<R: Rng + ?Sized>(dim: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    add_noise(&mut out, sigma, rng);
    out
}

/// `out += N(0, σ² I)`; a no-op when `σ = 0`.
pub fn add_noise<R: Rng + ?Sized>(out: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma == 0.0 {
        return;
    }
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

const INDEX_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const OUTPUT_STREAM: u64 = 2;

/// Per-run randomness: one ChaCha20 key derived from a 64-bit seed, with
/// independent streams for index sampling, noise, and output selection.
#[derive(Clone, Debug)]
pub struct RunRng {
    seed: u64,
    index: ChaCha20Rng,
    noise: ChaCha20Rng,
    output: ChaCha20Rng,
}

impl RunRng {
    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            seed,
            index: stream(INDEX_STREAM),
            noise: stream(NOISE_STREAM),
            output: stream(OUTPUT_STREAM),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&mut self) -> &mut ChaCha20Rng {
        &mut self.index
    }

    pub fn noise(&mut self) -> &mut ChaCha20Rng {
        &mut self.noise
    }

    pub fn output(&mut self) -> &mut ChaCha20Rng {
        &mut self.output
    }
}
