//! DP-SVRG, DP-SVRG++ and DP-GD, their schedules and run traces.

pub mod gd;
pub mod noise;
pub mod pl;
pub mod schedule;
pub mod svrg;
pub mod trace;

pub use gd::{dp_gd, GdConfig, OutputMode};
pub use noise::{plan_noise, Calibration, QueryPattern};
pub use pl::{pl_check, PlReport};
pub use schedule::{
    check_svrg_condition, recommend_svrg_pp_schedule, recommend_svrg_schedule, recommend_t_gradnorm,
    recommend_t_pl, SvrgCondition, SvrgPpSchedule, SvrgSchedule, SVRG_MAX_KAPPA_MULTIPLE,
    SVRG_STEP_LADDER,
};
pub use svrg::{dp_svrg, dp_svrg_pp, variance_reduced_direction, SvrgConfig, SvrgPpConfig};
pub use trace::{EpochRecord, Reference, RunTrace};
