//! Quadratic mirror maps and the two argmin steps of accelerated mirror
//! descent.
//!
//! For `l2_ball(R)` the map is `w(x) = ‖x‖²/(2R²)`, exactly 1-strongly convex
//! in `‖·‖_C`. For `l1_ball(R)` it is `w(x) = p‖x‖²/(2R²)`, which is
//! 1-strongly convex in `‖·‖₁/R` because `‖v‖₁² ≤ p‖v‖₂²`; this costs a
//! factor `p` in `B_w` relative to a width-adapted map. Both argmin steps are
//! taken in the norm `‖v‖_w = √(2w(v))`, so every subproblem is a strongly
//! convex quadratic over the body.

use serde::{Deserialize, Serialize};

use super::body::{BodyKind, ConvexBody};
use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{dot, norm2_sq};

pub const INNER_TOLERANCE: f64 = 1e-10;
pub const INNER_MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorMap {
    body: ConvexBody,
    /// `w(x) = (scale/2)‖x‖²`.
    scale: f64,
    tolerance: f64,
}

impl MirrorMap {
    /// The quadratic map described in the module docs.
    pub fn for_body(body: ConvexBody) -> Result<Self> {
        body.validate()?;
        let r2 = body.radius * body.radius;
        let scale = match body.kind {
            BodyKind::L2Ball => 1.0 / r2,
            BodyKind::L1Ball => body.dim as f64 / r2,
        };
        Ok(Self {
            body,
            scale,
            tolerance: INNER_TOLERANCE,
        })
    }

    /// `w(x) = ½‖x‖²` on the body, regardless of its radius.
    pub fn euclidean(body: ConvexBody) -> Result<Self> {
        body.validate()?;
        Ok(Self {
            body,
            scale: 1.0,
            tolerance: INNER_TOLERANCE,
        })
    }

    /// Gradient-mapping tolerance of the inner solver.
    pub fn with_inner_tolerance(mut self, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "inner tolerance must be positive, got {tolerance}"
            )));
        }
        self.tolerance = tolerance;
        Ok(self)
    }

    pub fn inner_tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn body(&self) -> &ConvexBody {
        &self.body
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The ℓ2 body admits closed-form steps; others go through the inner
    /// solver.
    pub fn closed_form(&self) -> bool {
        self.body.kind == BodyKind::L2Ball
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.scale * norm2_sq(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.scale * v).collect()
    }

    /// `B_w(y, x) = w(y) - ⟨∇w(x), y - x⟩ - w(x)`.
    pub fn bregman(&self, y: &[f64], x: &[f64]) -> f64 {
        let gx = self.gradient(x);
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        self.value(y) - dot(&gx, &diff) - self.value(x)
    }

    /// `argmin_{y ∈ C} (L‖C‖₂²/2)‖y - x‖_w² + ⟨g, y - x⟩`.
    pub fn smoothed_min_step(&self, x: &[f64], g: &[f64], smoothness: f64) -> Result<Vec<f64>> {
        let d = self.body.l2_diameter();
        self.quadratic_step(x, g, smoothness * d * d * self.scale)
    }

    /// `argmin_{z ∈ C} B_w(z, z_k) + α⟨g, z - z_k⟩`.
    pub fn mirror_step(&self, z: &[f64], g: &[f64], alpha: f64) -> Result<Vec<f64>> {
        if alpha == 0.0 {
            ensure_dim(self.body.dim, z.len())?;
            return Ok(z.to_vec());
        }
        self.quadratic_step(z, g, self.scale / alpha)
    }

    /// `argmin_{y ∈ C} (curvature/2)‖y - center‖² + ⟨g, y - center⟩`.
    fn quadratic_step(&self, center: &[f64], g: &[f64], curvature: f64) -> Result<Vec<f64>> {
        ensure_dim(self.body.dim, center.len())?;
        ensure_dim(self.body.dim, g.len())?;
        if self.closed_form() {
            Ok(closed_form_quadratic(&self.body, center, g, curvature))
        } else {
            let grad = |y: &[f64]| -> Vec<f64> {
                y.iter()
                    .zip(center)
                    .zip(g)
                    .map(|((yi, ci), gi)| curvature * (yi - ci) + gi)
                    .collect()
            };
            projected_gradient(
                &self.body,
                center,
                grad,
                curvature,
                self.tolerance,
                INNER_MAX_ITERATIONS,
            )
            .map(|(y, _)| y)
        }
    }
}

/// Closed form of the quadratic subproblem: `P_C(center - g/curvature)`.
pub fn closed_form_quadratic(
    body: &ConvexBody,
    center: &[f64],
    g: &[f64],
    curvature: f64,
) -> Vec<f64> {
    let mut y: Vec<f64> = center
        .iter()
        .zip(g)
        .map(|(c, gi)| c - gi / curvature)
        .collect();
    body.project_in_place(&mut y);
    y
}

/// Projected gradient descent with step `1/smoothness`, stopped when the
/// gradient-mapping norm drops to `tol`. Returns the point and the number of
/// iterations used.
pub fn projected_gradient<F>(
    body: &ConvexBody,
    start: &[f64],
    grad: F,
    smoothness: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, usize)>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let step = 1.0 / smoothness;
    let mut x = body.project(start);
    let mut residual = f64::INFINITY;
    for it in 0..max_iterations {
        let g = grad(&x);
        let mut next: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        body.project_in_place(&mut next);
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            * smoothness;
        x = next;
        if residual <= tol {
            return Ok((x, it + 1));
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iterations,
        residual,
    })
}
