//! Budget at which a DP baseline matches a target error.

use crate::dp::{epsilon_for_target_error, epsilon_for_target_mse, epsilon_for_target_pe};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontierMetric {
    /// Per-user error probability against randomized response.
    PerUserPe,
    /// Aggregate EAE against the Laplace count release.
    Eae,
    /// Aggregate MSE against the LDP count estimate.
    Mse,
}

/// ε per target error. Each entry fails independently with
/// `Error::Unattainable` when no ε in range reaches its target.
pub fn dp_frontier_match(targets: &[(FrontierMetric, f64)], users: usize) -> Vec<Result<f64>> {
    targets
        .iter()
        .map(|&(metric, target)| match metric {
            FrontierMetric::PerUserPe => epsilon_for_target_pe(target),
            FrontierMetric::Eae => epsilon_for_target_error(target),
            FrontierMetric::Mse => epsilon_for_target_mse(target, users),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn trivial_targets() {
        let out = dp_frontier_match(
            &[
                (FrontierMetric::PerUserPe, 0.5),
                (FrontierMetric::Eae, 0.5),
                (FrontierMetric::Eae, 0.0),
                (FrontierMetric::PerUserPe, 0.7),
            ],
            1000,
        );
        assert_eq!(*out[0].as_ref().unwrap(), 0.0);
        assert!((out[1].as_ref().unwrap() - 2.0).abs() < 1e-6);
        assert!(matches!(out[2], Err(Error::Unattainable(_))));
        assert!(matches!(out[3], Err(Error::Unattainable(_))));
    }
}
