//! Per-user release mechanisms and their exact utility analysis.

mod analysis;
mod bounds;
mod mechanism;

pub use analysis::LocalAnalysis;
pub(crate) use bounds::report_from;
pub use bounds::{
    aggregate_eae_iid, error_probabilities, local_aggregate_eae_exact, local_aggregate_mse,
    local_error_law, lower_bound, ErrorCase, ErrorReport,
};
pub use mechanism::{build_mechanism, release, true_answer, ErrorSplit, LocalMechanism, MechanismKind};
