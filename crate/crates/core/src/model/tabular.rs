use rand::{Rng, RngCore};

use super::{check_table_size, sample_index, JointTable, LocusSet, Sequence, SequenceModel, TupleIndex};
use crate::{Error, Result};

/// Explicit pmf over the values at a fixed support locus set. Positions
/// outside the support are treated as independent uniform symbols when
/// sampling and cannot be queried.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    length: usize,
    table: JointTable,
    label: String,
}

impl TabularModel {
    pub fn new(length: usize, table: JointTable) -> Result<Self> {
        check_table_size(table.loci())?;
        table.loci().check_within(length)?;
        Ok(TabularModel {
            length,
            table,
            label: "tabular".to_string(),
        })
    }

    /// Empirical frequencies of the tuples at `support` over `rows`.
    /// With `smoothing`, every tuple receives one pseudo-count so no
    /// conditional probability is zero.
    pub fn from_dataset(
        rows: &[Sequence],
        support: &LocusSet,
        alphabet_size: usize,
        smoothing: bool,
    ) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a model to an empty dataset"))?;
        let length = first.len();
        check_table_size(support)?;
        support.check_within(length)?;
        let index = TupleIndex::new(alphabet_size, support.len());
        let pseudo = if smoothing { 1.0 } else { 0.0 };
        let mut counts = vec![pseudo; index.count()];
        for row in rows {
            if row.len() != length {
                return Err(Error::invalid("dataset rows have different lengths"));
            }
            counts[index.encode(&support.extract(row))] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let probs = counts.into_iter().map(|c| c / total).collect();
        let mut model = Self::new(length, JointTable::new(support.clone(), alphabet_size, probs)?)?;
        model.label = format!("empirical(rows={};smoothing={smoothing})", rows.len());
        Ok(model)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn support(&self) -> &LocusSet {
        self.table.loci()
    }

    pub fn table(&self) -> &JointTable {
        &self.table
    }
}

impl SequenceModel for TabularModel {
    fn alphabet_size(&self) -> usize {
        self.table.index().radix()
    }

    fn length(&self) -> usize {
        self.length
    }

    fn joint_table(&self, loci: &LocusSet) -> Result<JointTable> {
        loci.check_within(self.length)?;
        if !loci.is_subset(self.support()) {
            return Err(Error::invalid(format!(
                "loci {loci} are outside the tabular support {}",
                self.support()
            )));
        }
        self.table.marginal(loci)
    }

    fn sample_sequence(&self, rng: &mut dyn RngCore) -> Sequence {
        let c = self.alphabet_size();
        let tuple = self.table.index().decode(sample_index(self.table.probs(), rng));
        let mut values: Vec<u8> = (0..self.length).map(|_| rng.random_range(0..c) as u8).collect();
        for (l, v) in self.support().iter().zip(tuple) {
            values[l - 1] = v;
        }
        Sequence::from_raw(values)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(rows: &[&[u8]]) -> Vec<Sequence> {
        rows.iter().map(|r| Sequence::new(r.to_vec(), 2).unwrap()).collect()
    }

    #[test]
    fn empirical_frequencies() {
        let rows = seqs(&[&[0, 0, 1], &[0, 1, 1], &[0, 0, 0], &[1, 1, 1]]);
        let support = LocusSet::new(vec![1, 2]).unwrap();
        let m = TabularModel::from_dataset(&rows, &support, 2, false).unwrap();
        assert_eq!(m.joint_prob(&support, &[0, 0]).unwrap(), 0.5);
        assert_eq!(m.joint_prob(&support, &[1, 0]).unwrap(), 0.0);
        let one = LocusSet::new(vec![2]).unwrap();
        assert_eq!(m.joint_prob(&one, &[1]).unwrap(), 0.5);
        assert!(m.joint_prob(&LocusSet::new(vec![3]).unwrap(), &[1]).is_err());

        let smoothed = TabularModel::from_dataset(&rows, &support, 2, true).unwrap();
        assert!((smoothed.joint_prob(&support, &[1, 0]).unwrap() - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn support_cap() {
        let rows = vec![Sequence::new(vec![0; 14], 2).unwrap()];
        let err = TabularModel::from_dataset(&rows, &LocusSet::parse("1-13").unwrap(), 2, false)
            .unwrap_err();
        assert!(err.is_capacity());
    }
}
