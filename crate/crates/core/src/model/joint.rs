use super::{LocusSet, TupleIndex};
use crate::{Error, Result, SUM_TOLERANCE};

/// Dense joint pmf over the values at a locus set, indexed by
/// [`TupleIndex`] in locus order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    loci: LocusSet,
    index: TupleIndex,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(loci: LocusSet, alphabet_size: usize, probs: Vec<f64>) -> Result<Self> {
        let index = TupleIndex::new(alphabet_size, loci.len());
        if probs.len() != index.count() {
            return Err(Error::DimensionMismatch {
                expected: index.count(),
                got: probs.len(),
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("joint table has negative or non-finite entries"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("joint table sums to {total}, not 1")));
        }
        Ok(JointTable { loci, index, probs })
    }

    pub(crate) fn from_parts(loci: LocusSet, alphabet_size: usize, probs: Vec<f64>) -> Self {
        let index = TupleIndex::new(alphabet_size, loci.len());
        debug_assert_eq!(probs.len(), index.count());
        JointTable { loci, index, probs }
    }

    pub fn loci(&self) -> &LocusSet {
        &self.loci
    }

    pub fn index(&self) -> TupleIndex {
        self.index
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, values: &[u8]) -> f64 {
        self.probs[self.index.encode(values)]
    }

    /// Marginal over `sub`, which must be a subset of this table's loci.
    pub fn marginal(&self, sub: &LocusSet) -> Result<JointTable> {
        if !sub.is_subset(&self.loci) {
            return Err(Error::invalid(format!(
                "loci {sub} are not covered by the table over {}",
                self.loci
            )));
        }
        let positions = sub.positions_in(&self.loci);
        let out_index = TupleIndex::new(self.index.radix(), sub.len());
        let mut out = vec![0.0; out_index.count()];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let values = self.index.decode(i);
            out[out_index.encode_at(&values, &positions)] += p;
        }
        Ok(JointTable {
            loci: sub.clone(),
            index: out_index,
            probs: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginal_sums_out_positions() {
        let loci = LocusSet::new(vec![1, 2]).unwrap();
        // P(x1, x2) over a binary alphabet.
        let t = JointTable::new(loci, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let m2 = t.marginal(&LocusSet::new(vec![2]).unwrap()).unwrap();
        assert!((m2.probs()[0] - 0.4).abs() < 1e-15);
        assert!((m2.probs()[1] - 0.6).abs() < 1e-15);
        let m0 = t.marginal(&LocusSet::empty()).unwrap();
        assert!((m0.probs()[0] - 1.0).abs() < 1e-15);
        assert!(t.marginal(&LocusSet::new(vec![3]).unwrap()).is_err());
    }

    #[test]
    fn rejects_unnormalised_tables() {
        let loci = LocusSet::new(vec![1]).unwrap();
        assert!(JointTable::new(loci.clone(), 2, vec![0.5, 0.6]).is_err());
        assert!(JointTable::new(loci, 2, vec![0.5]).is_err());
    }
}
