use crate::model::{LocusSet, Query, SequenceModel, TupleIndex};
use crate::{Error, Result};

/// Everything the local mechanisms need from the prior, computed once from
/// the joint pmf over `L̄ ∪ S` (which equals `L ∪ S`).
///
/// Cells are indexed by `(x_L̄, x_S)` as `lbar * s_count + s`, where each
/// component is the [`TupleIndex`] code of the tuple in locus order.
#[derive(Debug, Clone)]
pub struct LocalAnalysis {
    pub query: Query,
    pub sensitive: LocusSet,
    /// Queried loci that are not sensitive.
    pub lbar: LocusSet,
    /// Queried loci that are sensitive.
    pub overlap: LocusSet,
    pub alphabet_size: usize,
    pub lbar_index: TupleIndex,
    pub s_index: TupleIndex,
    /// P(x_L̄, x_S).
    pub joint: Vec<f64>,
    /// P(x_S).
    pub p_sensitive: Vec<f64>,
    /// Code of v_L̄.
    pub v_lbar: usize,
    /// Whether x_S agrees with the reference on L∩S, per sensitive code.
    pub overlap_match: Vec<bool>,
    /// min over positive-probability w of P(x_L̄ | X_S = w), per x_L̄ code.
    pub min_conditional: Vec<f64>,
    /// 1 - P(X_{L∩S} = v_{L∩S}).
    pub mismatch: f64,
    /// P(X_L = v_L).
    pub p_match: f64,
}

impl LocalAnalysis {
    pub fn new<M: SequenceModel + ?Sized>(
        model: &M,
        query: &Query,
        sensitive: &LocusSet,
    ) -> Result<Self> {
        if query.loci().is_empty() {
            return Err(Error::invalid("query has no loci"));
        }
        let n = model.length();
        query.loci().check_within(n)?;
        sensitive.check_within(n)?;
        let c = model.alphabet_size();
        let lbar = query.loci().difference(sensitive);
        let overlap = query.loci().intersection(sensitive);
        let union = lbar.union(sensitive);
        let table = model.joint_table(&union)?;

        let lbar_pos = lbar.positions_in(&union);
        let s_pos = sensitive.positions_in(&union);
        let lbar_index = TupleIndex::new(c, lbar.len());
        let s_index = TupleIndex::new(c, sensitive.len());
        let s_count = s_index.count();

        let mut joint = vec![0.0; lbar_index.count() * s_count];
        for (i, &p) in table.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let values = table.index().decode(i);
            let li = lbar_index.encode_at(&values, &lbar_pos);
            let si = s_index.encode_at(&values, &s_pos);
            joint[li * s_count + si] += p;
        }

        let mut p_sensitive = vec![0.0; s_count];
        for (cell, &p) in joint.iter().enumerate() {
            p_sensitive[cell % s_count] += p;
        }

        let overlap_in_s = overlap.positions_in(sensitive);
        let v_overlap = query.reference_on(&overlap);
        let overlap_match: Vec<bool> = (0..s_count)
            .map(|si| {
                let xs = s_index.decode(si);
                overlap_in_s
                    .iter()
                    .zip(&v_overlap)
                    .all(|(&p, &v)| xs[p] == v)
            })
            .collect();
        let v_lbar = lbar_index.encode(&query.reference_on(&lbar));

        let mut min_conditional = vec![f64::INFINITY; lbar_index.count()];
        for (si, &ps) in p_sensitive.iter().enumerate() {
            if ps <= 0.0 {
                continue;
            }
            for (li, slot) in min_conditional.iter_mut().enumerate() {
                *slot = slot.min(joint[li * s_count + si] / ps);
            }
        }
        if min_conditional.iter().any(|m| m.is_infinite()) {
            return Err(Error::ZeroProbability);
        }

        let p_overlap_match: f64 = p_sensitive
            .iter()
            .zip(&overlap_match)
            .filter(|(_, &m)| m)
            .map(|(p, _)| p)
            .sum();
        let mismatch = if overlap.is_empty() {
            0.0
        } else {
            (1.0 - p_overlap_match).max(0.0)
        };
        let p_match = (0..s_count)
            .filter(|&si| overlap_match[si])
            .map(|si| joint[v_lbar * s_count + si])
            .sum();

        Ok(LocalAnalysis {
            query: query.clone(),
            sensitive: sensitive.clone(),
            lbar,
            overlap,
            alphabet_size: c,
            lbar_index,
            s_index,
            joint,
            p_sensitive,
            v_lbar,
            overlap_match,
            min_conditional,
            mismatch,
            p_match,
        })
    }

    pub fn s_count(&self) -> usize {
        self.s_index.count()
    }

    pub fn lbar_count(&self) -> usize {
        self.lbar_index.count()
    }

    /// P(x_L̄ | x_S); zero when x_S itself has zero probability.
    pub fn conditional(&self, lbar: usize, s: usize) -> f64 {
        let ps = self.p_sensitive[s];
        if ps <= 0.0 {
            0.0
        } else {
            self.joint[lbar * self.s_count() + s] / ps
        }
    }

    /// Dependence ratio min_w P(x_L̄|w) / P(x_L̄|x_S). Cells that cannot occur
    /// (zero conditional) get ratio 0.
    pub fn ratio(&self, lbar: usize, s: usize) -> f64 {
        let cond = self.conditional(lbar, s);
        if cond <= 0.0 {
            0.0
        } else {
            (self.min_conditional[lbar] / cond).min(1.0)
        }
    }

    /// Whether the user's true answer is 1 in cell (x_L̄, x_S).
    pub fn answer(&self, lbar: usize, s: usize) -> bool {
        lbar == self.v_lbar && self.overlap_match[s]
    }

    /// Σ_{x_L̄ ≠ v_L̄} min_w P(x_L̄ | w).
    pub fn min_mass_off_reference(&self) -> f64 {
        self.min_conditional
            .iter()
            .enumerate()
            .filter(|(li, _)| *li != self.v_lbar)
            .map(|(_, m)| m)
            .sum()
    }

    pub fn min_at_reference(&self) -> f64 {
        self.min_conditional[self.v_lbar]
    }

    /// Codes of the (x_L̄, x_S) cell a sequence falls into.
    pub fn cell_of(&self, values_lbar: &[u8], values_s: &[u8]) -> (usize, usize) {
        (self.lbar_index.encode(values_lbar), self.s_index.encode(values_s))
    }
}
