//! Differential-privacy baselines: randomized response on the per-user bit,
//! the Laplace mechanism on the aggregate count, and budget matching.

use rand::{Rng, RngCore};

use crate::{Error, Result};

/// Default search range for the privacy budget.
pub const EPSILON_RANGE: (f64, f64) = (1e-3, 50.0);
pub const EPSILON_TOLERANCE: f64 = 1e-6;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok(())
}

/// Flip probability of randomized response, 1 / (e^ε + 1).
pub fn rr_error_prob(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(1.0 / (epsilon.exp() + 1.0))
}

pub fn randomized_response(bit: bool, epsilon: f64, rng: &mut dyn RngCore) -> Result<bool> {
    let flip = rr_error_prob(epsilon)?;
    Ok(if rng.random::<f64>() < flip { !bit } else { bit })
}

/// 2x2 channel P(Y = y | A = a), rows indexed by a.
pub fn rr_channel(epsilon: f64) -> Result<[[f64; 2]; 2]> {
    let f = rr_error_prob(epsilon)?;
    Ok([[1.0 - f, f], [f, 1.0 - f]])
}

/// Minimum MSE of an unbiased LDP count estimate built from randomized
/// response: N e^ε (e^ε + 1) / (e^ε - 1)^2.
pub fn ldp_count_mse(users: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("LDP count MSE diverges at epsilon = 0"));
    }
    let e = epsilon.exp();
    Ok(users as f64 * e * (e + 1.0) / ((e - 1.0) * (e - 1.0)))
}

/// MSE of the unbiased count estimate (Σ Y_k - K f) / (1 - 2f) built from
/// randomized-response bits: K e^ε / (e^ε - 1)^2.
pub fn rr_unbiased_count_mse(users: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("unbiased RR estimate diverges at epsilon = 0"));
    }
    let e = epsilon.exp();
    Ok(users as f64 * e / ((e - 1.0) * (e - 1.0)))
}

/// Unbiased count estimate from the number of released ones.
pub fn rr_unbiased_count(ones: usize, users: usize, epsilon: f64) -> Result<f64> {
    let f = rr_error_prob(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("unbiased RR estimate diverges at epsilon = 0"));
    }
    Ok((ones as f64 - users as f64 * f) / (1.0 - 2.0 * f))
}

/// Count plus Laplace(0, 1/ε) noise, by inverse CDF.
pub fn laplace_count_release(count: f64, epsilon: f64, rng: &mut dyn RngCore) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("Laplace release needs epsilon > 0"));
    }
    let u: f64 = rng.random::<f64>() - 0.5;
    let scale = 1.0 / epsilon;
    Ok(count - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln())
}

/// Rounds and clamps a real release to `[0, users]`. Never increases |Y - a|.
pub fn clamp_count(release: f64, users: usize) -> f64 {
    release.round().clamp(0.0, users as f64)
}

/// E|Y - a| of the Laplace release, which is its scale 1/ε.
pub fn laplace_expected_error(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("Laplace release needs epsilon > 0"));
    }
    Ok(1.0 / epsilon)
}

/// Bisection for ε with `error(ε) = target`, where `error` is decreasing on
/// `[lo, hi]`.
pub fn match_epsilon(
    error: impl Fn(f64) -> f64,
    target: f64,
    lo: f64,
    hi: f64,
    tolerance: f64,
) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Unattainable(target));
    }
    let (mut lo, mut hi) = (lo, hi);
    let (e_lo, e_hi) = (error(lo), error(hi));
    if target > e_lo + tolerance || target < e_hi - tolerance {
        return Err(Error::Unattainable(target));
    }
    if (e_lo - target).abs() <= tolerance * tolerance {
        return Ok(lo);
    }
    while hi - lo > tolerance * 1e-3 {
        let mid = 0.5 * (lo + hi);
        if error(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// ε at which the Laplace release reaches the target EAE.
pub fn epsilon_for_target_error(target_eae: f64) -> Result<f64> {
    let (lo, hi) = EPSILON_RANGE;
    match_epsilon(|e| 1.0 / e, target_eae, lo, hi, EPSILON_TOLERANCE)
}

/// ε at which randomized response reaches the target per-user error.
pub fn epsilon_for_target_pe(target_pe: f64) -> Result<f64> {
    match_epsilon(
        |e| 1.0 / (e.exp() + 1.0),
        target_pe,
        0.0,
        EPSILON_RANGE.1,
        EPSILON_TOLERANCE,
    )
}

/// ε at which the LDP count estimate reaches the target MSE.
pub fn epsilon_for_target_mse(target_mse: f64, users: usize) -> Result<f64> {
    let (lo, hi) = EPSILON_RANGE;
    match_epsilon(
        |e| ldp_count_mse(users, e).unwrap_or(f64::INFINITY),
        target_mse,
        lo,
        hi,
        EPSILON_TOLERANCE * target_mse.max(1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::f64::consts::E;

    #[test]
    fn rr_formula_values() {
        assert_eq!(rr_error_prob(0.0).unwrap(), 0.5);
        assert!((rr_error_prob(3f64.ln()).unwrap() - 0.25).abs() < 1e-15);
        assert!(rr_error_prob(-1.0).is_err());
        assert!(rr_error_prob(f64::NAN).is_err());
    }

    #[test]
    fn rr_is_epsilon_ldp() {
        for eps in [0.0, 0.3, 1.0, 4.0, 12.0] {
            let ch = rr_channel(eps).unwrap();
            for y in 0..2 {
                let ratio = ch[0][y].max(ch[1][y]) / ch[0][y].min(ch[1][y]);
                assert!(ratio <= eps.exp() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn rr_flip_rate() {
        let mut rng = seeded(11);
        let eps = 1.0;
        let n = 1_000_000;
        let flips = (0..n)
            .filter(|i| {
                let bit = i % 2 == 0;
                randomized_response(bit, eps, &mut rng).unwrap() != bit
            })
            .count();
        let p = rr_error_prob(eps).unwrap();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((flips as f64 / n as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn ldp_mse_values() {
        let expected = 1000.0 * E * (E + 1.0) / ((E - 1.0) * (E - 1.0));
        assert!((ldp_count_mse(1000, 1.0).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 3423.324).abs() < 1e-3);
        assert!(ldp_count_mse(1000, 0.0).is_err());
        assert!(ldp_count_mse(1000, 10.0).unwrap() < 1010.0);
        let grid: Vec<f64> = (1..100).map(|i| ldp_count_mse(50, i as f64 * 0.1).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
        let pe: Vec<f64> = (0..100).map(|i| rr_error_prob(i as f64 * 0.1).unwrap()).collect();
        assert!(pe.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn laplace_mean_absolute_error() {
        let mut rng = seeded(3);
        let eps = 2.0;
        let n = 400_000;
        let errs: Vec<f64> = (0..n)
            .map(|_| (laplace_count_release(10.0, eps, &mut rng).unwrap() - 10.0).abs())
            .collect();
        let mean = errs.iter().sum::<f64>() / n as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.5).abs() < 4.0 * (var / n as f64).sqrt());
        assert_eq!(laplace_expected_error(2.0).unwrap(), 0.5);
    }

    #[test]
    fn laplace_reproducible() {
        let a = laplace_count_release(5.0, 1.0, &mut seeded(8)).unwrap();
        let b = laplace_count_release(5.0, 1.0, &mut seeded(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matching_inverts_formulas() {
        assert!((epsilon_for_target_error(0.5).unwrap() - 2.0).abs() < 1e-6);
        assert!(matches!(epsilon_for_target_error(0.0), Err(Error::Unattainable(_))));
        assert!(matches!(epsilon_for_target_error(-1.0), Err(Error::Unattainable(_))));
        assert_eq!(epsilon_for_target_pe(0.5).unwrap(), 0.0);
        let e = epsilon_for_target_pe(0.25).unwrap();
        assert!((e - 3f64.ln()).abs() < 1e-6);
        let m = ldp_count_mse(1000, 1.5).unwrap();
        assert!((epsilon_for_target_mse(m, 1000).unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn clamping_never_hurts() {
        for (y, a) in [(-3.2, 0.0), (12.7, 10.0), (4.4, 4.0)] {
            assert!((clamp_count(y, 10) - a).abs() <= (y - a).abs());
        }
    }

    #[test]
    fn unbiased_rr_estimate_mse() {
        let (k, eps, t) = (50, 1.2, 40_000);
        let mut rng = seeded(21);
        let errs: Vec<f64> = (0..t)
            .map(|_| {
                let ones = (0..k)
                    .filter(|&i| randomized_response(i < 20, eps, &mut rng).unwrap())
                    .count();
                (rr_unbiased_count(ones, k, eps).unwrap() - 20.0).powi(2)
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / t as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
        let expected = rr_unbiased_count_mse(k, eps).unwrap();
        assert!((mean - expected).abs() < 4.0 * (var / t as f64).sqrt());
    }
}
