//! Step-size and iteration-count recommendations. Hidden constants in the
//! rates are set to 1, so every recommendation here is a heuristic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::privacy::PrivacyBudget;

/// Step sizes tried by [`recommend_svrg_schedule`], as `η = 1/(cL)`.
pub const SVRG_STEP_LADDER: [f64; 12] = [
    12.0, 16.0, 24.0, 32.0, 40.0, 48.0, 64.0, 96.0, 128.0, 192.0, 256.0, 512.0,
];
/// Largest multiple of `κ` tried for the epoch length.
pub const SVRG_MAX_KAPPA_MULTIPLE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgCondition {
    pub value: f64,
    pub ok: bool,
}

/// Evaluates `1/(η(1-8ηL)μm) + 8Lη(m+1)/(m(1-8Lη))`; the schedule qualifies
/// when this is below ½ and `η ≤ 1/(12L)`.
pub fn check_svrg_condition(eta: f64, smoothness: f64, mu: f64, m: usize) -> Result<SvrgCondition> {
    for (name, v) in [("eta", eta), ("L", smoothness), ("mu", mu)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    if m == 0 {
        return Err(invalid("m must be ≥ 1"));
    }
    let shrink = 1.0 - 8.0 * eta * smoothness;
    if shrink <= 0.0 {
        return Err(invalid(format!(
            "condition undefined for eta ≥ 1/(8L) (eta = {eta}, L = {smoothness})"
        )));
    }
    let m_f = m as f64;
    let value = 1.0 / (eta * shrink * mu * m_f) + 8.0 * smoothness * eta * (m_f + 1.0) / (m_f * shrink);
    let ok = value < 0.5 && eta * smoothness <= 1.0 / 12.0 * (1.0 + 1e-12);
    Ok(SvrgCondition { value, ok })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgSchedule {
    pub eta: f64,
    pub inner_steps: usize,
    pub epochs: usize,
    pub condition: SvrgCondition,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

/// `(η, m)` from the ladder with the smallest feasible `m` (a multiple of
/// `κ = L/μ`), and `T = ceil(log₂(n²ε²μ/(pG² ln(1/δ))))`, at least 1.
pub fn recommend_svrg_schedule(
    smoothness: f64,
    mu: f64,
    n: usize,
    p: usize,
    lipschitz: f64,
    budget: &PrivacyBudget,
) -> Result<SvrgSchedule> {
    positive("L", smoothness)?;
    positive("mu", mu)?;
    positive("G", lipschitz)?;
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be ≥ 1"));
    }
    let kappa = smoothness / mu;
    let mut found = None;
    'search: for j in 1..=SVRG_MAX_KAPPA_MULTIPLE {
        let m = ((j as f64 * kappa).ceil() as usize).max(1);
        let mut best: Option<(f64, SvrgCondition)> = None;
        for c in SVRG_STEP_LADDER {
            let eta = 1.0 / (c * smoothness);
            let cond = check_svrg_condition(eta, smoothness, mu, m)?;
            if cond.ok && best.is_none_or(|(_, b)| cond.value < b.value) {
                best = Some((eta, cond));
            }
        }
        if let Some((eta, condition)) = best {
            found = Some((eta, m, condition));
            break 'search;
        }
    }
    let (eta, inner_steps, condition) = found.ok_or_else(|| {
        Error::Infeasible(format!(
            "no step size in the ladder satisfies the SVRG condition with m ≤ {}·κ (κ = {kappa})",
            SVRG_MAX_KAPPA_MULTIPLE
        ))
    })?;
    let (n_f, eps) = (n as f64, budget.epsilon());
    let arg = n_f * n_f * eps * eps * mu
        / (p as f64 * lipschitz * lipschitz * (1.0 / budget.delta()).ln());
    Ok(SvrgSchedule {
        eta,
        inner_steps,
        epochs: ceil_at_least_one(arg.log2()),
        condition,
    })
}

fn ceil_at_least_one(v: f64) -> usize {
    if v.is_finite() && v > 1.0 {
        v.ceil() as usize
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrgPpSchedule {
    pub eta: f64,
    pub base_inner_steps: usize,
    pub epochs: usize,
}

/// `η = 1/(13L)` and `T = ceil(log₂(nε/(G√(p ln(1/δ)))))`, at least 1.
pub fn recommend_svrg_pp_schedule(
    smoothness: f64,
    n: usize,
    p: usize,
    lipschitz: f64,
    budget: &PrivacyBudget,
    base_inner_steps: usize,
) -> Result<SvrgPpSchedule> {
    positive("L", smoothness)?;
    positive("G", lipschitz)?;
    if n == 0 || p == 0 || base_inner_steps == 0 {
        return Err(invalid("n, p and m must be ≥ 1"));
    }
    let arg = n as f64 * budget.epsilon()
        / (lipschitz * (p as f64 * (1.0 / budget.delta()).ln()).sqrt());
    Ok(SvrgPpSchedule {
        eta: 1.0 / (13.0 * smoothness),
        base_inner_steps,
        epochs: ceil_at_least_one(arg.log2()),
    })
}

/// `T = ceil(ln(n²ε²/(pG² ln(1/δ))))`, at least 1. `L` and `μ` only enter
/// through the hidden constant and are validated but otherwise unused.
pub fn recommend_t_pl(
    smoothness: f64,
    mu: f64,
    n: usize,
    p: usize,
    lipschitz: f64,
    budget: &PrivacyBudget,
) -> Result<usize> {
    positive("L", smoothness)?;
    positive("mu", mu)?;
    positive("G", lipschitz)?;
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be ≥ 1"));
    }
    let (n_f, eps) = (n as f64, budget.epsilon());
    let arg =
        n_f * n_f * eps * eps / (p as f64 * lipschitz * lipschitz * (1.0 / budget.delta()).ln());
    Ok(ceil_at_least_one(arg.ln()))
}

/// `T = ceil(√L nε/(√(p ln(1/δ)) G))`, at least 1.
pub fn recommend_t_gradnorm(
    smoothness: f64,
    n: usize,
    p: usize,
    lipschitz: f64,
    budget: &PrivacyBudget,
) -> Result<usize> {
    positive("L", smoothness)?;
    positive("G", lipschitz)?;
    if n == 0 || p == 0 {
        return Err(invalid("n and p must be ≥ 1"));
    }
    let t = smoothness.sqrt() * n as f64 * budget.epsilon()
        / ((p as f64 * (1.0 / budget.delta()).ln()).sqrt() * lipschitz);
    Ok(ceil_at_least_one(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> PrivacyBudget {
        PrivacyBudget::new(1.0, 1e-5).unwrap()
    }

    #[test]
    fn condition_hand_values() {
        let c = check_svrg_condition(1.0 / 24.0, 1.0, 1.0, 100).unwrap();
        assert!((c.value - 0.865).abs() < 1e-12);
        assert!(!c.ok);
        // At η = 1/(13L) the second term alone exceeds 8/5.
        let c = check_svrg_condition(1.0 / 13.0, 1.0, 1.0, 1_000_000).unwrap();
        assert!(c.value > 1.6 && !c.ok);
        assert!(check_svrg_condition(1.0 / 8.0, 1.0, 1.0, 10).is_err());
        assert!(check_svrg_condition(0.2, 1.0, 1.0, 10).is_err());
        assert!(check_svrg_condition(0.01, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn condition_step_cap() {
        // Generous m, but η above 1/(12L) is never accepted.
        let c = check_svrg_condition(1.0 / 11.0, 1.0, 1.0, 10_000_000).unwrap();
        assert!(!c.ok);
    }

    #[test]
    fn condition_decreases_in_m() {
        for c in [12.0, 24.0, 48.0] {
            let eta = 1.0 / c;
            let mut prev = f64::INFINITY;
            for m in (1..2000).step_by(7) {
                let v = check_svrg_condition(eta, 1.0, 0.1, m).unwrap().value;
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn pl_and_gradnorm_hand_values() {
        assert_eq!(recommend_t_pl(1.0, 0.1, 1000, 10, 1.0, &budget()).unwrap(), 10);
        assert_eq!(recommend_t_gradnorm(1.0, 1000, 10, 1.0, &budget()).unwrap(), 94);
        let tiny = PrivacyBudget::new(1e-6, 0.5).unwrap();
        assert_eq!(recommend_t_pl(1.0, 0.1, 2, 100, 1.0, &tiny).unwrap(), 1);
        assert_eq!(recommend_t_gradnorm(1.0, 2, 100, 1.0, &tiny).unwrap(), 1);
    }

    #[test]
    fn svrg_pp_schedule_heuristic() {
        let s = recommend_svrg_pp_schedule(0.25, 1000, 10, 1.0, &budget(), 10).unwrap();
        assert!((s.eta - 1.0 / 3.25).abs() < 1e-15);
        // log₂(1000/√(10·ln 1e5)) = log₂(93.2) → 7.
        assert_eq!(s.epochs, 7);
    }
}
