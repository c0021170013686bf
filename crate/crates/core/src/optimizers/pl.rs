//! Empirical check of the Polyak-Łojasiewicz inequality
//! `‖∇F(x)‖² ≥ 2μ(F(x) - F*)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, invalid, Result};
use crate::linalg::norm2_sq;
use crate::objective::SmoothObjective;

/// Points with `F(x) - F*` below this are skipped.
pub const PL_GAP_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlReport {
    /// Smallest `‖∇F‖²/(2(F - F*))` over the evaluated points.
    pub worst_ratio: Option<f64>,
    pub worst_index: Option<usize>,
    pub evaluated: usize,
    pub skipped: usize,
    pub holds: bool,
}

pub fn pl_check<O: SmoothObjective>(
    obj: &O,
    f_star: f64,
    mu_pl: f64,
    points: &[Vec<f64>],
) -> Result<PlReport> {
    if !(mu_pl >= 0.0 && mu_pl.is_finite()) {
        return Err(invalid(format!("mu_pl must be ≥ 0, got {mu_pl}")));
    }
    let mut report = PlReport {
        worst_ratio: None,
        worst_index: None,
        evaluated: 0,
        skipped: 0,
        holds: true,
    };
    for (idx, x) in points.iter().enumerate() {
        ensure_dim(obj.dim(), x.len())?;
        let gap = obj.value(x) - f_star;
        if gap < PL_GAP_FLOOR {
            report.skipped += 1;
            continue;
        }
        report.evaluated += 1;
        let ratio = norm2_sq(&obj.gradient(x)) / (2.0 * gap);
        if report.worst_ratio.is_none_or(|w| ratio < w) {
            report.worst_ratio = Some(ratio);
            report.worst_index = Some(idx);
        }
    }
    report.holds = report.worst_ratio.is_none_or(|w| w >= mu_pl);
    Ok(report)
}
