//! Data loading, reference optima, experiment orchestration and result
//! serialization.

pub mod data;
pub mod experiment;
pub mod reference;
pub mod results;
pub mod spec;

pub use data::{
    load_dataset, synth_logistic, synth_logistic_with_signal, synth_quadratic, DataKind, DatasetSource, LabelMode,
    Normalization,
};
pub use experiment::{build_objective, run_experiment, spec_digest};
pub use reference::{reference_minimizer, reference_projected, DEFAULT_REFERENCE_TOLERANCE};
pub use results::{
    emit_results, median, read_results, Aggregate, OutputFormat, Quartiles, ResultRecord, RunSummary,
};
pub use spec::{Algorithm, ExperimentSpec, RegularizerKind};
