//! Experiment plans, Monte Carlo sweeps and CSV output.

mod baseline;
mod frontier;
mod harness;
mod plan;

pub use baseline::{mask_and_sample_baseline, MaskMode};
pub use frontier::{dp_frontier_match, FrontierMetric};
pub use harness::{
    overlap_sweep, run_plan, AuditRow, Metric, PlanOutput, ResultRow, Source, AUDIT_HEADER,
    RESULTS_HEADER,
};
pub use plan::{parse_grid, ExperimentPlan, MarkovParam, MechanismId, ModelSpec, PlanPoint, PointModel};
