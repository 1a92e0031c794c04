use rand::{Rng, RngCore};
use rayon::prelude::*;

use super::aggregate::{binomial_pmf, match_given_sensitive, poisson_binomial};
use crate::local::LocalAnalysis;
use crate::model::{sample_index, LocusSet, Query, SequenceModel, TupleIndex};
use crate::{Error, Result, SUM_TOLERANCE};

/// Default cap on `users * |S|`, the number of sensitive symbols enumerated.
pub const DEFAULT_SYMBOL_LIMIT: usize = 10;

/// Fully enumerated central channel P(Y = y | A = a, X_S = x_S) for every
/// positive-probability sensitive matrix.
#[derive(Debug, Clone)]
pub struct CentralChannel {
    users: usize,
    prior: Vec<f64>,
    s_index: TupleIndex,
    /// Sensitive code of each user, per matrix.
    matrices: Vec<Vec<usize>>,
    matrix_probs: Vec<f64>,
    /// P(A = a | matrix).
    conditionals: Vec<Vec<f64>>,
    /// min over matrices of P(A = a | matrix).
    min_conditional: Vec<f64>,
    ratios: Vec<Vec<f64>>,
}

pub fn build_central_channel<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    users: usize,
) -> Result<CentralChannel> {
    build_with_limit(model, query, sensitive, users, DEFAULT_SYMBOL_LIMIT)
}

pub(crate) fn check_capacity(users: usize, sensitive_len: usize, limit: usize) -> Result<()> {
    let symbols = users * sensitive_len;
    if symbols > limit {
        return Err(Error::Capacity {
            what: "central channel enumeration (users x sensitive loci)",
            needed: symbols,
            limit,
            hint: "use the sampling path (CentralMechanism) or an empirical audit",
        });
    }
    Ok(())
}

impl CentralChannel {
    pub fn build_with_limit<M: SequenceModel + ?Sized>(
        model: &M,
        query: &Query,
        sensitive: &LocusSet,
        users: usize,
        symbol_limit: usize,
    ) -> Result<Self> {
        build_with_limit(model, query, sensitive, users, symbol_limit)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn s_index(&self) -> TupleIndex {
        self.s_index
    }

    pub fn matrix_count(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrix(&self, m: usize) -> &[usize] {
        &self.matrices[m]
    }

    pub fn matrix_prob(&self, m: usize) -> f64 {
        self.matrix_probs[m]
    }

    pub fn conditional(&self, m: usize) -> &[f64] {
        &self.conditionals[m]
    }

    pub fn min_conditional(&self) -> &[f64] {
        &self.min_conditional
    }

    pub fn ratio(&self, a: usize, m: usize) -> f64 {
        self.ratios[m][a]
    }

    /// Overrides one dependence ratio; used to build identity or corrupted
    /// channels for auditing.
    pub fn set_ratio(&mut self, a: usize, m: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!("ratio {value} outside [0, 1]")));
        }
        self.ratios[m][a] = value;
        Ok(())
    }

    pub fn set_all_ratios(&mut self, value: f64) -> Result<()> {
        for m in 0..self.matrix_count() {
            for a in 0..=self.users {
                self.set_ratio(a, m, value)?;
            }
        }
        Ok(())
    }

    /// Index of the matrix whose users hold the given sensitive codes.
    pub fn matrix_index(&self, codes: &[usize]) -> Option<usize> {
        self.matrices.iter().position(|m| m == codes)
    }

    pub fn prob(&self, y: usize, a: usize, m: usize) -> f64 {
        let r = self.ratios[m][a];
        let base = self.prior[y] * (1.0 - r);
        if y == a {
            base + r
        } else {
            base
        }
    }

    pub fn row(&self, a: usize, m: usize) -> Vec<f64> {
        (0..=self.users).map(|y| self.prob(y, a, m)).collect()
    }

    /// Largest |Σ_y row - 1| over all (a, matrix) rows.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.matrix_count())
            .flat_map(|m| (0..=self.users).map(move |a| (a, m)))
            .map(|(a, m)| (self.row(a, m).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Exact EAE by summing over matrices, counts and outputs.
    pub fn expected_error(&self) -> f64 {
        let k = self.users;
        (0..self.matrix_count())
            .map(|m| {
                let pm = self.matrix_probs[m];
                (0..=k)
                    .map(|a| {
                        let pa = self.conditionals[m][a];
                        if pa == 0.0 {
                            return 0.0;
                        }
                        let err: f64 = (0..=k)
                            .map(|y| (y as f64 - a as f64).abs() * self.prob(y, a, m))
                            .sum();
                        pa * err
                    })
                    .sum::<f64>()
                    * pm
            })
            .sum()
    }
}

fn build_with_limit<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    users: usize,
    symbol_limit: usize,
) -> Result<CentralChannel> {
    if users == 0 {
        return Err(Error::invalid("central release needs at least one user"));
    }
    check_capacity(users, sensitive.len(), symbol_limit)?;
    let a = LocalAnalysis::new(model, query, sensitive)?;
    let q = match_given_sensitive(&a);
    let support: Vec<usize> = (0..a.s_count()).filter(|&s| a.p_sensitive[s] > 0.0).collect();

    let count = support
        .len()
        .checked_pow(users as u32)
        .ok_or_else(|| Error::invalid("sensitive support overflow"))?;
    let matrices: Vec<Vec<usize>> = (0..count)
        .map(|mut code| {
            let mut m = vec![0; users];
            for slot in m.iter_mut().rev() {
                *slot = support[code % support.len()];
                code /= support.len();
            }
            m
        })
        .collect();
    let matrix_probs: Vec<f64> = matrices
        .iter()
        .map(|m| m.iter().map(|&s| a.p_sensitive[s]).product())
        .collect();
    let conditionals: Vec<Vec<f64>> = matrices
        .par_iter()
        .map(|m| poisson_binomial(&m.iter().map(|&s| q[s]).collect::<Vec<_>>()))
        .collect();

    let mut min_conditional = vec![f64::INFINITY; users + 1];
    for c in &conditionals {
        for (slot, &p) in min_conditional.iter_mut().zip(c) {
            *slot = slot.min(p);
        }
    }
    let ratios = conditionals
        .iter()
        .map(|c| {
            c.iter()
                .zip(&min_conditional)
                .map(|(&p, &m)| if p <= 0.0 { 0.0 } else { (m / p).min(1.0) })
                .collect()
        })
        .collect();

    let prior = binomial_pmf(users, a.p_match);
    let channel = CentralChannel {
        users,
        prior,
        s_index: a.s_index,
        matrices,
        matrix_probs,
        conditionals,
        min_conditional,
        ratios,
    };
    debug_assert!(channel.max_row_defect() <= SUM_TOLERANCE);
    Ok(channel)
}

/// Categorical draw from row (a, matrix).
pub fn central_release(
    channel: &CentralChannel,
    a: usize,
    matrix: usize,
    rng: &mut dyn RngCore,
) -> usize {
    let r = channel.ratio(a, matrix);
    if r >= 1.0 || (r > 0.0 && rng.random::<f64>() < r) {
        a
    } else {
        sample_index(channel.prior(), rng)
    }
}
