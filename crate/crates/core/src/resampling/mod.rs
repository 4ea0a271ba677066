//! Bootstrap and permutation replicates of the full analysis.

mod engine;
mod plan;

pub use engine::{
    bootstrap_standard_errors, check_dropped, permutation_null, permutation_z_fields, replicate_survives,
    run_replicates, sample_sd, standard_errors, z_scores, ChangePipeline, ReplicateRunner, Replicates,
    MAX_DROPPED_REPLICATES, MAX_FAILED_STATIONS,
};
pub use plan::{make_plan, plan_streams, resample_maxima, ResampleKind, ResamplePlan};
