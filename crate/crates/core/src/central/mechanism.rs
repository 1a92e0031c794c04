//! Central release for independent users sharing one prior.
//!
//! The channel releases the true count `a` with probability
//! `R(a, x_S) = min_w P(A=a | w) / P(A=a | x_S)` and otherwise an
//! independent draw from the count prior `P_A`. That mixture is exactly the
//! row `P_A(y) + (1 - P_A(y)) R` on the diagonal and `P_A(y) (1 - R)` off it.
//!
//! `min_w P(A=a | w)` ranges over every sensitive matrix. P(A=a | w) is a
//! Poisson-binomial pmf value, which is affine in each user's match
//! probability q_k(w_k); the minimum over the box of achievable q values is
//! therefore attained with every q_k at the smallest or largest achievable
//! value, and by symmetry only the number of users at the largest value
//! matters. That reduces the search to `K + 1` candidates.

use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::aggregate::{binomial_pmf, match_given_sensitive, poisson_binomial_at};
use super::AggregateDistribution;
use crate::local::LocalAnalysis;
use crate::model::{sample_index, LocusSet, Query, Sequence, SequenceModel, TupleIndex};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CentralMechanism {
    users: usize,
    prior: AggregateDistribution,
    sensitive: LocusSet,
    s_index: TupleIndex,
    match_given_sensitive: Vec<f64>,
    p_sensitive: Vec<f64>,
    min_conditional: Vec<f64>,
    /// Σ_y |y - a| P_A(y) per a.
    spread: Vec<f64>,
    /// Σ_y (y - a)^2 P_A(y) per a.
    spread_sq: Vec<f64>,
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// min over `n` in 0..=users of the pmf of Bin(n, q_hi) + Bin(users - n, q_lo).
pub(crate) fn vertex_minimum(users: usize, q_lo: f64, q_hi: f64) -> Vec<f64> {
    if (q_hi - q_lo).abs() == 0.0 {
        return binomial_pmf(users, q_lo);
    }
    (0..=users)
        .into_par_iter()
        .map(|n| convolve(&binomial_pmf(n, q_hi), &binomial_pmf(users - n, q_lo)))
        .reduce_with(|a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect())
        .expect("at least one candidate")
}

impl CentralMechanism {
    pub fn new<M: SequenceModel + ?Sized>(
        model: &M,
        query: &Query,
        sensitive: &LocusSet,
        users: usize,
    ) -> Result<Self> {
        let analysis = LocalAnalysis::new(model, query, sensitive)?;
        Self::from_analysis(&analysis, users)
    }

    pub fn from_analysis(a: &LocalAnalysis, users: usize) -> Result<Self> {
        if users == 0 {
            return Err(Error::invalid("central release needs at least one user"));
        }
        let q = match_given_sensitive(a);
        let reachable = || {
            q.iter()
                .zip(&a.p_sensitive)
                .filter(|(_, &p)| p > 0.0)
                .map(|(q, _)| *q)
        };
        let q_lo = reachable().fold(f64::INFINITY, f64::min);
        let q_hi = reachable().fold(f64::NEG_INFINITY, f64::max);
        let prior = AggregateDistribution::from_pmf(binomial_pmf(users, a.p_match))?;
        let min_conditional = vertex_minimum(users, q_lo, q_hi)
            .into_iter()
            .zip(prior.pmf())
            .map(|(m, &p)| m.min(p))
            .collect();
        let moment = |power: i32| -> Vec<f64> {
            (0..=users)
                .map(|a| {
                    prior
                        .pmf()
                        .iter()
                        .enumerate()
                        .map(|(y, p)| (y as f64 - a as f64).abs().powi(power) * p)
                        .sum()
                })
                .collect()
        };
        let (spread, spread_sq) = (moment(1), moment(2));
        Ok(CentralMechanism {
            users,
            prior,
            sensitive: a.sensitive.clone(),
            s_index: a.s_index,
            match_given_sensitive: q,
            p_sensitive: a.p_sensitive.clone(),
            min_conditional,
            spread,
            spread_sq,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn prior(&self) -> &AggregateDistribution {
        &self.prior
    }

    /// min_w P(A = a | X_S = w) for every a.
    pub fn min_conditional(&self) -> &[f64] {
        &self.min_conditional
    }

    /// q(x_S) per sensitive code.
    pub fn match_given_sensitive(&self) -> &[f64] {
        &self.match_given_sensitive
    }

    /// Per-user match probabilities for the dataset's sensitive tuples.
    pub fn user_match_probs(&self, users: &[Sequence]) -> Result<Vec<f64>> {
        users
            .iter()
            .map(|u| {
                let s = self.s_index.encode(&self.sensitive.extract(u));
                if self.p_sensitive[s] <= 0.0 {
                    Err(Error::ZeroProbability)
                } else {
                    Ok(self.match_given_sensitive[s])
                }
            })
            .collect()
    }

    /// R(a, x_S) given the users' match probabilities.
    pub fn ratio(&self, a: usize, user_match_probs: &[f64]) -> f64 {
        let cond = poisson_binomial_at(user_match_probs, a);
        if cond <= 0.0 {
            0.0
        } else {
            (self.min_conditional[a] / cond).min(1.0)
        }
    }

    /// E|Y - a| for a fixed true count whose dependence ratio is `ratio`.
    pub fn expected_error_given(&self, a: usize, ratio: f64) -> f64 {
        (1.0 - ratio) * self.spread[a]
    }

    pub fn expected_squared_error_given(&self, a: usize, ratio: f64) -> f64 {
        (1.0 - ratio) * self.spread_sq[a]
    }

    /// Closed-form EAE averaged over the prior:
    /// Σ_a Σ_{y≠a} |y-a| P_A(y) [P_A(a) - min_w P(A=a|w)].
    pub fn expected_error(&self) -> f64 {
        self.weighted(&self.spread)
    }

    /// Same average with squared deviations.
    pub fn expected_squared_error(&self) -> f64 {
        self.weighted(&self.spread_sq)
    }

    fn weighted(&self, spread: &[f64]) -> f64 {
        self.prior
            .pmf()
            .iter()
            .zip(&self.min_conditional)
            .zip(spread)
            .map(|((p, m), s)| (p - m).max(0.0) * s)
            .sum()
    }

    /// Draws Y given the true count and the dataset's match probabilities.
    pub fn release(&self, a: usize, user_match_probs: &[f64], rng: &mut dyn RngCore) -> usize {
        let r = self.ratio(a, user_match_probs);
        if r >= 1.0 || (r > 0.0 && rng.random::<f64>() < r) {
            a
        } else {
            sample_index(self.prior.pmf(), rng)
        }
    }
}

pub fn central_expected_error<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    users: usize,
) -> Result<f64> {
    Ok(CentralMechanism::new(model, query, sensitive, users)?.expected_error())
}

/// The closed form stated for i.i.d. uniform sequences:
/// 0 when the mismatch probability is at most 1/2, otherwise
/// `2 (Σ_a a P_A(a) F_A(a) - K λ²)` with λ = C^{-|L|} and A ~ Bin(K, λ).
pub fn uniform_iid_corollary_eae(
    users: usize,
    query_len: usize,
    overlap_len: usize,
    alphabet_size: usize,
) -> f64 {
    let c = alphabet_size as f64;
    let mismatch = 1.0 - c.powi(-(overlap_len as i32));
    if overlap_len == 0 || mismatch <= 0.5 {
        return 0.0;
    }
    let lambda = c.powi(-(query_len as i32));
    let prior = AggregateDistribution::from_pmf(binomial_pmf(users, lambda)).expect("binomial");
    let s: f64 = prior
        .pmf()
        .iter()
        .zip(prior.cdf())
        .enumerate()
        .map(|(a, (p, f))| a as f64 * p * f)
        .sum();
    2.0 * (s - users as f64 * lambda * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarkovChainModel;
    use crate::rng::seeded;

    fn loci(v: &[usize]) -> LocusSet {
        LocusSet::new(v.to_vec()).unwrap()
    }

    /// min over all 2^K assignments of q_k ∈ {lo, hi} by brute force.
    fn brute_vertex_min(k: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut best = vec![f64::INFINITY; k + 1];
        for mask in 0..(1usize << k) {
            let qs: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 1 { hi } else { lo }).collect();
            for (a, b) in best.iter_mut().enumerate() {
                *b = b.min(poisson_binomial_at(&qs, a));
            }
        }
        best
    }

    #[test]
    fn vertex_reduction_matches_brute_force() {
        for (lo, hi) in [(0.1, 0.7), (0.0, 0.25), (0.3, 1.0)] {
            let fast = vertex_minimum(6, lo, hi);
            for (a, b) in fast.iter().zip(brute_vertex_min(6, lo, hi)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn independent_sensitive_loci_give_zero_error() {
        let m = MarkovChainModel::iid_uniform(4, 4).unwrap();
        let q = Query::new(loci(&[2]), vec![1]).unwrap();
        let c = CentralMechanism::new(&m, &q, &loci(&[1]), 10).unwrap();
        assert!(c.expected_error().abs() < 1e-15);
        let mut rng = seeded(4);
        let probs = vec![0.25; 10];
        for a in 0..=10 {
            assert_eq!(c.release(a, &probs, &mut rng), a);
        }
    }

    #[test]
    fn zero_users_rejected() {
        let m = MarkovChainModel::iid_uniform(4, 4).unwrap();
        let q = Query::new(loci(&[2]), vec![1]).unwrap();
        assert!(CentralMechanism::new(&m, &q, &loci(&[1]), 0).is_err());
    }
}
