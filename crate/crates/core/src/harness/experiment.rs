//! Runs an [`ExperimentSpec`]: every budget times every repetition.

use std::time::Instant;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::data::{load_dataset, DataKind};
use super::reference::{reference_minimizer, reference_projected, REFERENCE_MAX_ITERATIONS};
use super::results::{
    Aggregate, DatasetSummary, ObjectiveConstants, ResolvedSchedule, ResultRecord, RunSummary,
    SCHEMA_VERSION,
};
use super::spec::{Algorithm, ExperimentSpec};
use crate::error::{Error, Result};
use crate::geometry::{dp_accmd, gaussian_width_mc, recommend_t_accmd, AccMdConfig, MirrorMap};
use crate::linalg::norm2_sq;
use crate::objective::{derive_constants, ErmObjective, LossModel, Regularizer, SmoothObjective};
use crate::optimizers::{
    dp_gd, dp_svrg, dp_svrg_pp, plan_noise, recommend_svrg_pp_schedule, recommend_svrg_schedule,
    recommend_t_gradnorm, recommend_t_pl, GdConfig, QueryPattern, Reference, RunTrace, SvrgConfig,
    SvrgPpConfig,
};
use crate::privacy::{NoisePlan, PrivacyBudget, RunRng};

/// Default epoch length for DP-SVRG++.
pub const DEFAULT_SVRG_PP_M: usize = 10;

pub fn spec_digest(spec: &ExperimentSpec) -> Result<String> {
    let json = serde_json::to_string(spec).map_err(|e| Error::Serialization(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}

/// Builds the objective described by `spec`. For synthetic quadratics run by
/// the full-gradient methods the exact Hessian bounds of the construction are
/// used for `L` and `μ`; otherwise constants come from the data.
pub fn build_objective(spec: &ExperimentSpec) -> Result<ErmObjective> {
    let source = spec.source()?;
    let data = load_dataset(&source)?;
    let regularizer = spec.regularizer_value();
    let full_gradient = matches!(spec.algorithm, Algorithm::DpGd | Algorithm::DpAccmd);
    match source.kind {
        DataKind::SyntheticQuadratic { mu, l, .. } if full_gradient => {
            let radius = if spec.algorithm == Algorithm::DpAccmd {
                spec.radius
            } else {
                1.0
            };
            let derived = derive_constants(&data, spec.loss, radius);
            let loss = LossModel {
                kind: spec.loss,
                lipschitz: derived.lipschitz,
                smoothness: l,
            };
            let obj = ErmObjective::with_loss(data, loss, regularizer)?;
            let total_mu = mu + obj.strong_convexity();
            obj.with_strong_convexity(total_mu)
        }
        _ => ErmObjective::new(data, spec.loss, regularizer),
    }
}

fn excess_and_grad(obj: &ErmObjective, x: &[f64], reference: &Reference) -> (f64, f64) {
    let excess = obj
        .value_difference(x, &reference.point)
        .map(|d| d + (obj.value(&reference.point) - reference.value))
        .unwrap_or(f64::NAN);
    let grad = match obj.regularizer() {
        Regularizer::None | Regularizer::SquaredL2 { .. } => {
            norm2_sq(&SmoothObjective::gradient(obj, x))
        }
        _ => obj
            .gradient_mapping_norm(x, 1.0 / obj.smoothness())
            .map_or(f64::NAN, |g| g * g),
    };
    (excess, grad)
}

struct Prepared {
    schedule: ResolvedSchedule,
    noise: NoisePlan,
}

fn need(v: Option<usize>, what: &str, algorithm: Algorithm) -> Result<usize> {
    v.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{algorithm} needs an explicit {what} when the objective is not strongly convex"
        ))
    })
}

fn prepare(
    spec: &ExperimentSpec,
    obj: &ErmObjective,
    budget: &PrivacyBudget,
    width: Option<f64>,
) -> Result<Prepared> {
    let (n, p) = (obj.n(), obj.dim());
    let g = obj.lipschitz();
    let l = obj.smoothness();
    let mu = obj.strong_convexity();
    let consts = spec.constants();
    let schedule = match spec.algorithm {
        Algorithm::DpSvrg => {
            if mu > 0.0 && (spec.t.is_none() || spec.m.is_none() || spec.eta.is_none()) {
                let rec = match recommend_svrg_schedule(l, mu, n, p, g, budget) {
                    Ok(r) => Some(r),
                    Err(e) if spec.m.is_some() && spec.eta.is_some() => {
                        warn!("{e}");
                        None
                    }
                    Err(e) => return Err(e),
                };
                ResolvedSchedule {
                    epochs: spec.t.or(rec.map(|r| r.epochs)).unwrap_or(1),
                    inner_steps: spec.m.or(rec.map(|r| r.inner_steps)),
                    eta: spec.eta.or(rec.map(|r| r.eta)),
                }
            } else {
                ResolvedSchedule {
                    epochs: need(spec.t, "T", spec.algorithm)?,
                    inner_steps: Some(need(spec.m, "m", spec.algorithm)?),
                    eta: Some(spec.eta.unwrap_or(1.0 / (12.0 * l))),
                }
            }
        }
        Algorithm::DpSvrgPp => {
            let m = spec.m.unwrap_or(DEFAULT_SVRG_PP_M);
            let rec = recommend_svrg_pp_schedule(l, n, p, g, budget, m)?;
            ResolvedSchedule {
                epochs: spec.t.unwrap_or(rec.epochs),
                inner_steps: Some(m),
                eta: Some(spec.eta.unwrap_or(rec.eta)),
            }
        }
        Algorithm::DpGd => {
            let epochs = match spec.t {
                Some(t) => t,
                None if mu > 0.0 => recommend_t_pl(l, mu, n, p, g, budget)?,
                None => recommend_t_gradnorm(l, n, p, g, budget)?,
            };
            ResolvedSchedule {
                epochs,
                inner_steps: None,
                eta: Some(spec.eta.unwrap_or(1.0 / obj.smoothness_bound())),
            }
        }
        Algorithm::DpAccmd => {
            let epochs = match spec.t {
                Some(t) => t,
                None => {
                    let body = spec.body_value(p);
                    let map = MirrorMap::for_body(body)?;
                    // Largest B_w(x, 0) over the body: a data-independent bound.
                    let bregman0 = 0.5 * map.scale() * body.radius * body.radius;
                    recommend_t_accmd(
                        obj.smoothness_bound(),
                        width.unwrap_or(0.0),
                        body.l2_diameter(),
                        bregman0,
                        n,
                        g,
                        budget,
                    )?
                }
            };
            ResolvedSchedule {
                epochs,
                inner_steps: None,
                eta: None,
            }
        }
    };
    let pattern = match spec.algorithm {
        Algorithm::DpSvrg => QueryPattern::Svrg {
            epochs: schedule.epochs,
            inner_steps: schedule.inner_steps.unwrap_or(1),
        },
        Algorithm::DpSvrgPp => QueryPattern::SvrgPp {
            epochs: schedule.epochs,
            base_inner_steps: schedule.inner_steps.unwrap_or(1),
        },
        Algorithm::DpGd | Algorithm::DpAccmd => QueryPattern::FullGradient {
            iterations: schedule.epochs,
        },
    };
    let noise = plan_noise(pattern, spec.calibration, g, n, budget, &consts)?;
    Ok(Prepared { schedule, noise })
}

fn run_once(
    spec: &ExperimentSpec,
    obj: &ErmObjective,
    prepared: &Prepared,
    seed: u64,
    reference: &Reference,
) -> Result<RunTrace> {
    let mut rng = RunRng::new(seed);
    let x0 = vec![0.0; obj.dim()];
    let s = &prepared.schedule;
    let noise = prepared.noise.clone();
    match spec.algorithm {
        Algorithm::DpSvrg => {
            let cfg = SvrgConfig {
                epochs: s.epochs,
                inner_steps: s.inner_steps.unwrap_or(1),
                eta: s.eta.unwrap_or(f64::NAN),
                x0,
                noise,
            };
            dp_svrg(obj, &cfg, &mut rng, Some(reference))
        }
        Algorithm::DpSvrgPp => {
            let cfg = SvrgPpConfig {
                epochs: s.epochs,
                base_inner_steps: s.inner_steps.unwrap_or(1),
                eta: s.eta.unwrap_or(f64::NAN),
                x0,
                noise,
            };
            dp_svrg_pp(obj, &cfg, &mut rng, Some(reference))
        }
        Algorithm::DpGd => {
            let cfg = GdConfig {
                iterations: s.epochs,
                eta: s.eta.unwrap_or(f64::NAN),
                x0,
                noise,
                output: spec.output_mode,
            };
            dp_gd(obj, &cfg, &mut rng, Some(reference))
        }
        Algorithm::DpAccmd => {
            let map = MirrorMap::for_body(spec.body_value(obj.dim()))?;
            let mut cfg = AccMdConfig::new(s.epochs, x0, noise);
            cfg.schedule = spec.accmd_schedule;
            dp_accmd(obj, &map, &cfg, &mut rng, Some(reference))
        }
    }
}

/// Validates the spec, loads data, computes the reference once and runs all
/// `(ε, repetition)` pairs with seed `base_seed + repetition`. Errors before
/// the first run are returned as `Err`; a failing run stops the experiment and
/// yields a record with `complete = false` holding the finished runs.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultRecord> {
    spec.validate()?;
    let digest = spec_digest(spec)?;
    let obj = build_objective(spec)?;
    let reference = match spec.algorithm {
        Algorithm::DpAccmd => reference_projected(
            &obj,
            &spec.body_value(obj.dim()),
            spec.reference_tol,
            REFERENCE_MAX_ITERATIONS,
        )?,
        _ => reference_minimizer(&obj, spec.reference_tol)?,
    };
    info!(
        "reference F* = {} (residual {:e}, converged {})",
        reference.value, reference.residual, reference.converged
    );
    let width = if spec.algorithm == Algorithm::DpAccmd && spec.t.is_none() {
        let mut rng = ChaCha20Rng::seed_from_u64(spec.base_seed);
        Some(gaussian_width_mc(&spec.body_value(obj.dim()), spec.width_samples, &mut rng)?.mean)
    } else {
        None
    };

    let mut prepared = Vec::with_capacity(spec.epsilon.len());
    for &epsilon in &spec.epsilon {
        let budget = PrivacyBudget::new(epsilon, spec.delta)?;
        prepared.push((epsilon, prepare(spec, &obj, &budget, width)?));
    }

    let mut runs = Vec::new();
    let mut error = None;
    'outer: for (epsilon, prep) in &prepared {
        for rep in 0..spec.repetitions {
            let seed = spec.base_seed.wrapping_add(rep as u64);
            let start = Instant::now();
            match run_once(spec, &obj, prep, seed, &reference) {
                Ok(trace) => {
                    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                    let (excess, grad) = excess_and_grad(&obj, &trace.final_point, &reference);
                    runs.push(RunSummary {
                        algorithm: trace.algorithm.clone(),
                        epsilon: *epsilon,
                        delta: spec.delta,
                        repetition: rep,
                        seed,
                        schedule: prep.schedule,
                        noise: prep.noise.clone(),
                        final_excess_risk: excess,
                        final_grad_norm_sq: grad,
                        sample_gradients: trace.sample_gradients,
                        output_index: trace.output_index,
                        wall_ms,
                        records: trace.records,
                    });
                }
                Err(e) => {
                    warn!("run ε = {epsilon}, repetition {rep} failed: {e}");
                    error = Some(format!("ε = {epsilon}, repetition {rep}: {e}"));
                    break 'outer;
                }
            }
        }
    }
    let aggregates = spec
        .epsilon
        .iter()
        .filter_map(|&e| Aggregate::from_runs(e, spec.delta, &runs))
        .collect();
    let source = spec.source()?;
    Ok(ResultRecord {
        schema_version: SCHEMA_VERSION,
        spec_digest: digest,
        spec: spec.clone(),
        dataset: DatasetSummary {
            source: source.kind.to_string(),
            n: obj.n(),
            p: obj.dim(),
        },
        constants: ObjectiveConstants {
            lipschitz: obj.lipschitz(),
            smoothness: obj.smoothness(),
            strong_convexity: obj.strong_convexity(),
        },
        reference,
        runs,
        aggregates,
        complete: error.is_none(),
        error,
    })
}
