//! Monte Carlo Gaussian width `E sup_{w∈C} ⟨b, w⟩`, `b ~ N(0, I_p)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::body::ConvexBody;
use crate::error::{invalid, Result};

pub const MIN_WIDTH_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Sample mean of the squared support function, `E[W]` in the noise
    /// analysis.
    pub mean_square: f64,
    pub samples: usize,
}

/// Averages the support function `h_C(b)` (`R‖b‖₂` on the ℓ2 ball,
/// `R‖b‖_∞` on the ℓ1 ball) over `n_samples` Gaussian draws.
pub fn gaussian_width_mc<R: Rng + ?Sized>(
    body: &ConvexBody,
    n_samples: usize,
    rng: &mut R,
) -> Result<WidthEstimate> {
    body.validate()?;
    if n_samples < MIN_WIDTH_SAMPLES {
        return Err(invalid(format!(
            "need at least {MIN_WIDTH_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut b = vec![0.0; body.dim];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        b.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let h = body.dual_norm(&b);
        sum += h;
        sum_sq += h * h;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let mean_square = sum_sq / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(WidthEstimate {
        mean,
        std_error: (var / n).sqrt(),
        mean_square,
        samples: n_samples,
    })
}
