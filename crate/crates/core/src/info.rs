//! Binary entropy (in bits) and its inverse on the lower branch.

use crate::{Error, Result};

/// Slack allowed on the argument of [`inverse_binary_entropy`] before it is
/// rejected instead of clamped.
pub const ENTROPY_CLAMP_TOLERANCE: f64 = 1e-9;

/// Entropy values at or below this are rounding noise and invert to 0.
pub const INVERSE_TOLERANCE: f64 = 1e-12;

/// h(p) = -p log2 p - (1-p) log2(1-p), with 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    let p = p.clamp(0.0, 1.0);
    term(p) + term(1.0 - p)
}

/// The unique p in [0, 1/2] with h(p) = t, found by bisection. Returns the
/// lower end of the final bracket, so h(result) <= t.
pub fn inverse_binary_entropy(t: f64) -> Result<f64> {
    if !t.is_finite()
        || t < -ENTROPY_CLAMP_TOLERANCE
        || t > 1.0 + ENTROPY_CLAMP_TOLERANCE
    {
        return Err(Error::invalid(format!("entropy value {t} outside [0, 1]")));
    }
    let t = t.clamp(0.0, 1.0);
    if t <= INVERSE_TOLERANCE {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid) <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
