use crate::local::LocalAnalysis;
use crate::model::{LocusSet, Query, SequenceModel};
use crate::{Error, Result, SUM_TOLERANCE};

/// Law of the true count A = Σ_k A_k.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDistribution {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl AggregateDistribution {
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("count pmf must be non-empty and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("count pmf sums to {total}")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(AggregateDistribution { pmf, cdf })
    }

    pub fn users(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(a, p)| a as f64 * p).sum()
    }
}

/// Pmf of a sum of independent Bernoulli(p_k) by iterative convolution.
pub fn poisson_binomial(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        for a in (0..=k + 1).rev() {
            let stay = pmf[a] * (1.0 - p);
            let moved = if a > 0 { pmf[a - 1] * p } else { 0.0 };
            pmf[a] = stay + moved;
        }
    }
    pmf
}

/// Single value P(Σ_k Bernoulli(p_k) = a). Only counts up to `a` (or the
/// complementary count of failures) are tracked.
pub fn poisson_binomial_at(probs: &[f64], a: usize) -> f64 {
    let n = probs.len();
    if a > n {
        return 0.0;
    }
    // Track whichever of successes / failures has the smaller target.
    let (target, flip) = if a <= n - a { (a, false) } else { (n - a, true) };
    let mut dist = vec![0.0; target + 1];
    dist[0] = 1.0;
    for &p in probs {
        let p = if flip { 1.0 - p } else { p };
        for j in (0..=target).rev() {
            let moved = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = dist[j] * (1.0 - p) + moved;
        }
    }
    dist[target]
}

pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    if p <= 0.0 || p >= 1.0 {
        let mut pmf = vec![0.0; n + 1];
        pmf[if p >= 1.0 { n } else { 0 }] = 1.0;
        return pmf;
    }
    // Recurrence in log space keeps large n stable.
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut log_choose = 0.0f64;
    (0..=n)
        .map(|k| {
            if k > 0 {
                log_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            (log_choose + k as f64 * lp + (n - k) as f64 * lq).exp()
        })
        .collect()
}

pub fn aggregate_distribution(per_user_match_probs: &[f64]) -> Result<AggregateDistribution> {
    if let Some(p) = per_user_match_probs
        .iter()
        .find(|p| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::invalid(format!("match probability {p} not in [0, 1]")));
    }
    AggregateDistribution::from_pmf(poisson_binomial(per_user_match_probs))
}

/// Sensitive tuples of all users, one row per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SensitiveMatrix {
    rows: Vec<Vec<u8>>,
}

impl SensitiveMatrix {
    pub fn new(rows: Vec<Vec<u8>>, sensitive_len: usize, alphabet_size: usize) -> Result<Self> {
        for row in &rows {
            if row.len() != sensitive_len {
                return Err(Error::DimensionMismatch {
                    expected: sensitive_len,
                    got: row.len(),
                });
            }
            if row.iter().any(|&v| v as usize >= alphabet_size) {
                return Err(Error::invalid("sensitive value outside alphabet"));
            }
        }
        Ok(SensitiveMatrix { rows })
    }

    pub fn users(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }
}

/// P(A = · | X_S = matrix) for independent users sharing `model`: the
/// Poisson-binomial law of q_k = P(X_L = v_L | X_S = x_S^(k)).
pub fn conditional_aggregate<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    matrix: &SensitiveMatrix,
) -> Result<Vec<f64>> {
    let analysis = LocalAnalysis::new(model, query, sensitive)?;
    let q = match_given_sensitive(&analysis);
    let mut probs = Vec::with_capacity(matrix.users());
    for row in matrix.rows() {
        let s = analysis.s_index.encode(row);
        if analysis.p_sensitive[s] <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        probs.push(q[s]);
    }
    Ok(poisson_binomial(&probs))
}

/// q(x_S) = P(X_L = v_L | X_S = x_S) per sensitive code (0 where x_S has
/// zero probability).
pub(crate) fn match_given_sensitive(a: &LocalAnalysis) -> Vec<f64> {
    (0..a.s_count())
        .map(|s| {
            if a.overlap_match[s] {
                a.conditional(a.v_lbar, s)
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(probs: &[f64]) -> Vec<f64> {
        let n = probs.len();
        let mut pmf = vec![0.0; n + 1];
        for mask in 0..(1usize << n) {
            let mut p = 1.0;
            for (k, &q) in probs.iter().enumerate() {
                p *= if mask >> k & 1 == 1 { q } else { 1.0 - q };
            }
            pmf[mask.count_ones() as usize] += p;
        }
        pmf
    }

    #[test]
    fn binomial_special_case() {
        let pmf = poisson_binomial(&[0.25; 3]);
        let expected = [27.0 / 64.0, 27.0 / 64.0, 9.0 / 64.0, 1.0 / 64.0];
        for (a, b) in pmf.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in binomial_pmf(3, 0.25).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_and_enumeration() {
        let pmf = poisson_binomial(&[0.0, 1.0]);
        assert_eq!(pmf, vec![0.0, 1.0, 0.0]);
        let mixed = [0.1, 0.45, 0.9, 0.3, 0.62];
        for (a, b) in poisson_binomial(&mixed).iter().zip(brute_force(&mixed)) {
            assert!((a - b).abs() < 1e-12);
        }
        for a in 0..=5 {
            assert!((poisson_binomial_at(&mixed, a) - brute_force(&mixed)[a]).abs() < 1e-12);
        }
        assert_eq!(poisson_binomial_at(&mixed, 6), 0.0);
    }

    #[test]
    fn distribution_invariants() {
        let d = aggregate_distribution(&[0.2, 0.5, 0.7]).unwrap();
        assert_eq!(d.users(), 3);
        assert_eq!(*d.cdf().last().unwrap(), 1.0);
        assert!(d.cdf().windows(2).all(|w| w[0] <= w[1]));
        assert!((d.mean() - 1.4).abs() < 1e-12);
        assert!(aggregate_distribution(&[1.2]).is_err());
    }

    #[test]
    fn large_binomial_is_normalised() {
        let pmf = binomial_pmf(1000, 0.0625);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
