use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{norm1, norm2, norm_inf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    L2Ball,
    L1Ball,
}

/// Centrally symmetric convex body in `ℝ^p`: an ℓ2 or ℓ1 ball of radius `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    pub kind: BodyKind,
    pub radius: f64,
    pub dim: usize,
}

impl ConvexBody {
    pub fn l2_ball(dim: usize, radius: f64) -> Self {
        Self {
            kind: BodyKind::L2Ball,
            radius,
            dim,
        }
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Self {
        Self {
            kind: BodyKind::L1Ball,
            radius,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!("ball radius must be > 0, got {}", self.radius)));
        }
        if self.dim == 0 {
            return Err(invalid("body dimension must be ≥ 1"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `‖C‖₂ = sup_{x,y ∈ C} ‖x - y‖₂`, which is `2R` for both balls.
    pub fn l2_diameter(&self) -> f64 {
        2.0 * self.radius
    }

    /// Gauge `‖v‖_C = min{r ≥ 0 : v ∈ rC}`.
    pub fn minkowski_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            BodyKind::L2Ball => norm2(v) / self.radius,
            BodyKind::L1Ball => norm1(v) / self.radius,
        }
    }

    /// `‖v‖_{C*} = max_{w ∈ C} |⟨w, v⟩|`; for symmetric `C` this is also the
    /// support function `sup_{w ∈ C} ⟨w, v⟩`.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self.kind {
            BodyKind::L2Ball => self.radius * norm2(v),
            BodyKind::L1Ball => self.radius * norm_inf(v),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.minkowski_norm(v) <= 1.0 + tol
    }

    /// Euclidean projection onto the body.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        match self.kind {
            BodyKind::L2Ball => {
                let n = norm2(y);
                if n > self.radius {
                    let s = self.radius / n;
                    y.iter_mut().for_each(|v| *v *= s);
                }
            }
            BodyKind::L1Ball => project_l1_ball(y, self.radius),
        }
    }
}

/// `‖v‖₂ ≤ ‖C‖₂ · ‖v‖_C`.
pub fn lemma51_check(body: &ConvexBody, v: &[f64]) -> bool {
    norm2(v) <= body.l2_diameter() * body.minkowski_norm(v) + 1e-12
}

/// Sort-and-threshold projection onto `{x : ‖x‖₁ ≤ radius}`.
fn project_l1_ball(y: &mut [f64], radius: f64) {
    if norm1(y) <= radius {
        return;
    }
    let mut u: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - radius) / (j + 1) as f64;
        if uj > t {
            theta = t;
        } else {
            break;
        }
    }
    for v in y.iter_mut() {
        *v = v.signum() * (v.abs() - theta).max(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn norms_by_hand() {
        let l2 = ConvexBody::l2_ball(2, 2.0);
        assert_relative_eq!(l2.minkowski_norm(&[3.0, 4.0]), 2.5);
        let l1 = ConvexBody::l1_ball(2, 1.0);
        assert_relative_eq!(l1.minkowski_norm(&[3.0, -4.0]), 7.0);
        assert_eq!(l1.minkowski_norm(&[0.0, 0.0]), 0.0);
        assert_eq!(l2.minkowski_norm(&[0.0, 0.0]), 0.0);

        assert_relative_eq!(ConvexBody::l2_ball(2, 1.0).dual_norm(&[3.0, 4.0]), 5.0);
        assert_relative_eq!(ConvexBody::l1_ball(2, 2.0).dual_norm(&[3.0, -4.0]), 8.0);
    }

    #[test]
    fn lemma51_cases() {
        let l2 = ConvexBody::l2_ball(3, 1.5);
        let v = [0.3, -1.2, 2.0];
        assert!(lemma51_check(&l2, &v));
        // ‖v‖₂ = R‖v‖_C and ‖C‖₂ = 2R: the bound is exactly twice the norm.
        assert_relative_eq!(
            norm2(&v) / (l2.l2_diameter() * l2.minkowski_norm(&v)),
            0.5,
            max_relative = 1e-14
        );
        assert!(lemma51_check(&ConvexBody::l1_ball(3, 1.0), &v));
        assert!(lemma51_check(&l2, &[0.0; 3]));
    }

    #[test]
    fn l1_projection_examples() {
        let b = ConvexBody::l1_ball(3, 1.0);
        assert_eq!(b.project(&[0.2, -0.3, 0.1]), vec![0.2, -0.3, 0.1]);
        let p = b.project(&[3.0, 0.0, 0.0]);
        assert_relative_eq!(p[0], 1.0);
        let p = b.project(&[1.0, 1.0, -1.0]);
        for v in &p {
            assert_relative_eq!(v.abs(), 1.0 / 3.0, max_relative = 1e-14);
        }
        let p = b.project(&[2.0, 0.5, 0.0]);
        assert_relative_eq!(p[0], 1.0);
        assert_relative_eq!(p[1], 0.0);
        assert_relative_eq!(norm1(&p), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn validation() {
        assert!(ConvexBody::l2_ball(2, 0.0).validate().is_err());
        assert!(ConvexBody::l1_ball(0, 1.0).validate().is_err());
        assert!(ConvexBody::l1_ball(2, 1.0).validate().is_ok());
    }
}
