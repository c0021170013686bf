//! Centrally symmetric bodies, mirror geometry and DP-AccMD.

pub mod accmd;
pub mod body;
pub mod mirror;
pub mod width;

pub use accmd::{dp_accmd, recommend_t_accmd, AccMdConfig, AccMdSchedule};
pub use body::{lemma51_check, BodyKind, ConvexBody};
pub use mirror::{closed_form_quadratic, projected_gradient, MirrorMap};
pub use width::{gaussian_width_mc, WidthEstimate};
