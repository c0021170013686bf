//! Differentially private empirical risk minimization by gradient
//! perturbation: DP-SVRG, DP-SVRG++, DP-GD and DP-AccMD, with noise
//! calibration and a small experiment harness.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod objective;
pub mod optimizers;
pub mod privacy;

pub use error::{Error, Result};
pub use objective::{
    derive_constants, DataPoint, Dataset, ErmObjective, LossKind, LossModel, Regularizer,
    SmoothObjective,
};
pub use privacy::{CalibrationConstants, NoiseMode, NoisePlan, PrivacyBudget, RunRng};
