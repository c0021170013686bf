//! High-accuracy reference optima for reporting excess risk.

use log::warn;

use crate::error::{ensure_dim, invalid, Result};
use crate::geometry::ConvexBody;
use crate::linalg::norm2;
use crate::objective::{ErmObjective, SmoothObjective};
use crate::optimizers::Reference;

pub const DEFAULT_REFERENCE_TOLERANCE: f64 = 1e-10;
pub const REFERENCE_MAX_ITERATIONS: usize = 1_000_000;

/// Proximal gradient descent from the origin with step `1/L`, stopped when
/// the prox-gradient mapping norm is at most `tol` or after
/// [`REFERENCE_MAX_ITERATIONS`]; in the latter case the last point is
/// returned with `converged = false`. `L` is the loss smoothness; the
/// regularizer is handled by its prox.
pub fn reference_minimizer(obj: &ErmObjective, tol: f64) -> Result<Reference> {
    reference_minimizer_with(obj, tol, REFERENCE_MAX_ITERATIONS, |_| {})
}

/// As [`reference_minimizer`], calling `observe` with the residual of every
/// iterate.
pub fn reference_minimizer_with<F: FnMut(f64)>(
    obj: &ErmObjective,
    tol: f64,
    max_iterations: usize,
    mut observe: F,
) -> Result<Reference> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let step = 1.0 / obj.smoothness();
    let regularizer = obj.regularizer();
    let mut x = vec![0.0; obj.dim()];
    regularizer.prox_in_place(step, &mut x);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let g = obj.full_gradient(&x)?;
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        regularizer.prox_in_place(step, &mut next);
        let diff: Vec<f64> = x.iter().zip(&next).map(|(a, b)| a - b).collect();
        residual = norm2(&diff) / step;
        observe(residual);
        if residual <= tol {
            return Ok(finish(obj.value(&x), x, residual, true));
        }
        x = next;
    }
    warn!("reference solver hit {max_iterations} iterations at residual {residual:e}");
    Ok(finish(obj.value(&x), x, residual, false))
}

fn finish(value: f64, point: Vec<f64>, residual: f64, converged: bool) -> Reference {
    Reference {
        point,
        value,
        residual,
        converged,
    }
}

/// Projected gradient descent for `min_{x ∈ C} F(x)` from the origin with
/// step `1/L`, same stopping rule as [`reference_minimizer`].
pub fn reference_projected<O: SmoothObjective>(
    obj: &O,
    body: &ConvexBody,
    tol: f64,
    max_iterations: usize,
) -> Result<Reference> {
    obj.ensure_smooth()?;
    ensure_dim(body.dim, obj.dim())?;
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let step = 1.0 / obj.smoothness_bound();
    let mut x = vec![0.0; obj.dim()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        let g = obj.gradient(&x);
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        body.project_in_place(&mut next);
        let diff: Vec<f64> = x.iter().zip(&next).map(|(a, b)| a - b).collect();
        residual = norm2(&diff) / step;
        if residual <= tol {
            return Ok(finish(obj.value(&x), x, residual, true));
        }
        x = next;
    }
    warn!("projected reference solver hit {max_iterations} iterations at residual {residual:e}");
    Ok(finish(obj.value(&x), x, residual, false))
}
