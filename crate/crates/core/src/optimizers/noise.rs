//! Noise calibration front-end shared by the optimizers and the harness.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::privacy::{
    calibrate_advanced, calibrate_full_gradient, calibrate_svrg, calibrate_svrg_pp,
    svrg_pp_total_steps, CalibrationConstants, NoisePlan, PrivacyBudget,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    #[default]
    Moments,
    Advanced,
    Off,
}

impl Calibration {
    pub fn name(self) -> &'static str {
        match self {
            Calibration::Moments => "moments",
            Calibration::Advanced => "advanced",
            Calibration::Off => "off",
        }
    }
}

impl std::str::FromStr for Calibration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "moments" => Ok(Calibration::Moments),
            "advanced" => Ok(Calibration::Advanced),
            "off" => Ok(Calibration::Off),
            other => Err(format!("unknown calibration `{other}` (moments, advanced, off)")),
        }
    }
}

/// The sequence of noisy queries an algorithm makes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryPattern {
    Svrg { epochs: usize, inner_steps: usize },
    SvrgPp { epochs: usize, base_inner_steps: usize },
    FullGradient { iterations: usize },
}

impl QueryPattern {
    pub fn total_queries(&self) -> Result<u64> {
        Ok(match *self {
            QueryPattern::Svrg { epochs, inner_steps } => epochs as u64 * inner_steps as u64,
            QueryPattern::SvrgPp {
                epochs,
                base_inner_steps,
            } => svrg_pp_total_steps(epochs, base_inner_steps)?,
            QueryPattern::FullGradient { iterations } => iterations as u64,
        })
    }

    fn sampling_ratio(&self, n: usize) -> f64 {
        match self {
            QueryPattern::FullGradient { .. } => 1.0,
            _ => 1.0 / n as f64,
        }
    }
}

/// Calibrates `σ` for `pattern`. In moments mode a plan whose ε-range check
/// fails is replaced by the advanced plan, with `fell_back` set.
pub fn plan_noise(
    pattern: QueryPattern,
    calibration: Calibration,
    lipschitz: f64,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    let queries = pattern.total_queries()?;
    match calibration {
        Calibration::Off => Ok(NoisePlan::off(queries, pattern.sampling_ratio(n))),
        Calibration::Advanced => advanced(pattern, lipschitz, n, budget, constants),
        Calibration::Moments => {
            let plan = match pattern {
                QueryPattern::Svrg {
                    epochs,
                    inner_steps,
                } => calibrate_svrg(lipschitz, epochs, inner_steps, n, budget, constants)?,
                QueryPattern::SvrgPp {
                    epochs,
                    base_inner_steps,
                } => calibrate_svrg_pp(lipschitz, epochs, base_inner_steps, n, budget, constants)?,
                QueryPattern::FullGradient { iterations } => {
                    calibrate_full_gradient(lipschitz, iterations, n, budget, constants)?
                }
            };
            if plan.valid {
                return Ok(plan);
            }
            info!(
                "moments calibration out of range ({}); switching to advanced",
                plan.diagnostic.as_deref().unwrap_or("")
            );
            let mut fallback = advanced(pattern, lipschitz, n, budget, constants)?;
            fallback.fell_back = true;
            fallback.diagnostic = plan.diagnostic;
            Ok(fallback)
        }
    }
}

fn advanced(
    pattern: QueryPattern,
    lipschitz: f64,
    n: usize,
    budget: &PrivacyBudget,
    constants: &CalibrationConstants,
) -> Result<NoisePlan> {
    let mut plan = calibrate_advanced(lipschitz, pattern.total_queries()?, n, budget, constants)?;
    plan.sampling_ratio = pattern.sampling_ratio(n);
    Ok(plan)
}
