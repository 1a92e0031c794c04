//! Trusted-server aggregation: the count distribution, the perfectly private
//! release channel over counts and its expected absolute error.

mod aggregate;
mod channel;
mod mechanism;

pub use aggregate::{
    aggregate_distribution, binomial_pmf, conditional_aggregate, poisson_binomial,
    poisson_binomial_at, AggregateDistribution, SensitiveMatrix,
};
pub use channel::{build_central_channel, central_release, CentralChannel, DEFAULT_SYMBOL_LIMIT};
pub use mechanism::{central_expected_error, uniform_iid_corollary_eae, CentralMechanism};
