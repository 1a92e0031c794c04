//! Closed-form error probabilities, the entropy lower bound and aggregate
//! errors for i.i.d. users.

use serde::{Deserialize, Serialize};

use super::{ErrorSplit, LocalAnalysis, MechanismKind};
use crate::info::{binary_entropy, inverse_binary_entropy};
use crate::model::{LocusSet, Query, SequenceModel};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorCase {
    /// Mismatch probability at most 1/2.
    MismatchAtMostHalf,
    MismatchAboveHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub overlap_len: usize,
    pub mismatch: f64,
    pub p_e1: f64,
    pub p_e2: f64,
    pub best: f64,
    pub best_kind: MechanismKind,
    pub lower_bound: f64,
    pub case: ErrorCase,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "model,overlap_len,mismatch,p_e1,p_e2,best,lower_bound";

    pub fn csv_row(&self, model: &str) -> String {
        format!(
            "{model},{},{:?},{:?},{:?},{:?},{:?}",
            self.overlap_len, self.mismatch, self.p_e1, self.p_e2, self.best, self.lower_bound
        )
    }
}

/// Closed-form per-user error probabilities of both mechanisms. Terms that
/// cancel exactly can round below zero, so results are clamped at 0.
pub(crate) fn closed_form(a: &LocalAnalysis) -> (f64, f64, ErrorCase) {
    let e = a.mismatch;
    let p_match = a.p_match;
    let min_ref = a.min_at_reference();
    let off = a.min_mass_off_reference();
    if e <= 0.5 {
        let p1 = p_match + (2.0 * e - 1.0) * min_ref;
        let p2 = 1.0 - p_match - off;
        (p1.max(0.0), p2.max(0.0), ErrorCase::MismatchAtMostHalf)
    } else {
        let p1 = p_match;
        let p2 = 1.0 - p_match - off - (2.0 * e - 1.0) * min_ref;
        (p1.max(0.0), p2.max(0.0), ErrorCase::MismatchAboveHalf)
    }
}

/// Fano-type bound on any perfectly private mechanism's per-user error.
pub(crate) fn lower_bound_from(a: &LocalAnalysis) -> Result<f64> {
    let s_count = a.s_count();
    let h_answer = binary_entropy(a.p_match);

    // Joint law of (A_L̄, A_{L∩S}).
    let mut p_overlap = [0.0f64; 2];
    let mut p_lbar_and_overlap = [0.0f64; 2];
    for si in 0..s_count {
        let b = a.overlap_match[si] as usize;
        p_overlap[b] += a.p_sensitive[si];
        p_lbar_and_overlap[b] += a.joint[a.v_lbar * s_count + si];
    }
    let h_lbar_given_overlap: f64 = (0..2)
        .filter(|&b| p_overlap[b] > 0.0)
        .map(|b| p_overlap[b] * binary_entropy(p_lbar_and_overlap[b] / p_overlap[b]))
        .sum();

    let h_answer_given_sensitive: f64 = (0..s_count)
        .filter(|&si| a.p_sensitive[si] > 0.0 && a.overlap_match[si])
        .map(|si| a.p_sensitive[si] * binary_entropy(a.conditional(a.v_lbar, si)))
        .sum();

    let gap = (h_answer - h_lbar_given_overlap.min(h_answer_given_sensitive)).max(0.0);
    inverse_binary_entropy(gap.min(1.0))
}

pub fn error_probabilities<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
) -> Result<ErrorReport> {
    let a = LocalAnalysis::new(model, query, sensitive)?;
    report_from(&a)
}

pub(crate) fn report_from(a: &LocalAnalysis) -> Result<ErrorReport> {
    let (p_e1, p_e2, case) = closed_form(a);
    let (best, best_kind) = if p_e1 <= p_e2 {
        (p_e1, MechanismKind::M1)
    } else {
        (p_e2, MechanismKind::M2)
    };
    Ok(ErrorReport {
        overlap_len: a.overlap.len(),
        mismatch: a.mismatch,
        p_e1,
        p_e2,
        best,
        best_kind,
        lower_bound: lower_bound_from(a)?,
        case,
    })
}

pub fn lower_bound<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
) -> Result<f64> {
    lower_bound_from(&LocalAnalysis::new(model, query, sensitive)?)
}

/// Aggregate EAE of the better mechanism when all `users` share `model`:
/// `users * min(P_e1, P_e2)`.
pub fn aggregate_eae_iid<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    users: usize,
) -> Result<f64> {
    if users == 0 {
        return Ok(0.0);
    }
    Ok(users as f64 * error_probabilities(model, query, sensitive)?.best)
}

/// E|Σ_k (Y_k - A_k)| for `users` independent users sharing one error split,
/// from the exact law of the sum of {-1, 0, +1} increments.
///
/// This equals `users * split.total()` when only one error type can occur,
/// and is smaller otherwise.
pub fn local_aggregate_eae_exact(split: ErrorSplit, users: usize) -> f64 {
    if users == 0 {
        return 0.0;
    }
    let down = split.missed;
    let up = split.false_alarm;
    let stay = (1.0 - down - up).max(0.0);
    let offset = users;
    let mut dist = vec![0.0; 2 * users + 1];
    dist[offset] = 1.0;
    for k in 0..users {
        let (lo, hi) = (offset - k, offset + k);
        let mut next = vec![0.0; 2 * users + 1];
        for d in lo..=hi {
            let p = dist[d];
            if p == 0.0 {
                continue;
            }
            next[d - 1] += p * down;
            next[d] += p * stay;
            next[d + 1] += p * up;
        }
        dist = next;
    }
    dist.iter()
        .enumerate()
        .map(|(d, p)| p * (d as f64 - offset as f64).abs())
        .sum()
}

/// E[(Σ_k (Y_k - A_k))^2] for `users` independent users sharing one split.
pub fn local_aggregate_mse(split: ErrorSplit, users: usize) -> f64 {
    let k = users as f64;
    let mean = split.false_alarm - split.missed;
    let second = split.false_alarm + split.missed;
    k * (second - mean * mean) + k * k * mean * mean
}

/// Law of Σ_k (Y_k - A_k) for independent users with their own splits,
/// indexed from `-splits.len()`.
pub fn local_error_law(splits: &[ErrorSplit]) -> Vec<f64> {
    let n = splits.len();
    let mut dist = vec![0.0; 2 * n + 1];
    dist[n] = 1.0;
    for (k, s) in splits.iter().enumerate() {
        let stay = (1.0 - s.missed - s.false_alarm).max(0.0);
        let mut next = vec![0.0; 2 * n + 1];
        for d in n - k..=n + k {
            let p = dist[d];
            if p == 0.0 {
                continue;
            }
            next[d - 1] += p * s.missed;
            next[d] += p * stay;
            next[d + 1] += p * s.false_alarm;
        }
        dist = next;
    }
    dist
}
