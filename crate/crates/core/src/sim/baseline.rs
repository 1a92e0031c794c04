//! Mask-and-sample baseline: hide the sensitive symbols, fill them in by
//! sampling, then answer the query on the filled-in sequence.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::model::{sample_index, LocusSet, Query, Sequence, TupleIndex};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// Each hidden symbol uniform over the alphabet.
    Uniform,
    /// Hidden tuple drawn from its frequency in the dataset.
    Prior,
}

impl fmt::Display for MaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMode::Uniform => "uniform",
            MaskMode::Prior => "prior",
        })
    }
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MaskMode::Uniform),
            "prior" => Ok(MaskMode::Prior),
            _ => Err(Error::invalid(format!("unknown mask mode '{s}' (uniform|prior)"))),
        }
    }
}

/// Per-user released bits.
pub fn mask_and_sample_baseline(
    dataset: &[Sequence],
    alphabet_size: usize,
    query: &Query,
    sensitive: &LocusSet,
    mode: MaskMode,
    rng: &mut dyn RngCore,
) -> Result<Vec<bool>> {
    let length = dataset.first().map_or(0, Sequence::len);
    query.loci().check_within(length)?;
    sensitive.check_within(length)?;
    let index = TupleIndex::new(alphabet_size, sensitive.len());
    let prior = match mode {
        MaskMode::Uniform => Vec::new(),
        MaskMode::Prior => {
            let mut freq = vec![0.0; index.count()];
            let w = 1.0 / dataset.len() as f64;
            for seq in dataset {
                freq[index.encode(&sensitive.extract(seq))] += w;
            }
            freq
        }
    };
    let positions: Vec<usize> = sensitive.iter().map(|l| l - 1).collect();
    let mut filled = Vec::with_capacity(length);
    Ok(dataset
        .iter()
        .map(|seq| {
            filled.clear();
            filled.extend_from_slice(seq.values());
            match mode {
                MaskMode::Uniform => {
                    for &p in &positions {
                        filled[p] = rng.random_range(0..alphabet_size) as u8;
                    }
                }
                MaskMode::Prior => {
                    let tuple = index.decode(sample_index(&prior, rng));
                    for (&p, v) in positions.iter().zip(tuple) {
                        filled[p] = v;
                    }
                }
            }
            query
                .loci()
                .iter()
                .zip(query.reference())
                .all(|(l, &v)| filled[l - 1] == v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkovChainModel, SequenceModel};
    use crate::rng::seeded;

    fn data(n: usize) -> Vec<Sequence> {
        let m = MarkovChainModel::symmetric(5, MarkovChainModel::uniform_initial(4), 0.8).unwrap();
        let mut rng = seeded(1);
        (0..n).map(|_| m.sample_sequence(&mut rng)).collect()
    }

    #[test]
    fn empty_sensitive_set_gives_true_answers() {
        let d = data(300);
        let q = Query::new(LocusSet::new(vec![2, 3]).unwrap(), vec![0, 0]).unwrap();
        for mode in [MaskMode::Uniform, MaskMode::Prior] {
            let out = mask_and_sample_baseline(&d, 4, &q, &LocusSet::empty(), mode, &mut seeded(2)).unwrap();
            assert!(out.iter().zip(&d).all(|(&y, s)| y == q.true_answer(s)));
        }
    }

    #[test]
    fn uniform_mask_over_whole_query() {
        let d = data(200_000);
        let q = Query::new(LocusSet::new(vec![2, 3]).unwrap(), vec![0, 1]).unwrap();
        let s = LocusSet::new(vec![1, 2, 3]).unwrap();
        let out = mask_and_sample_baseline(&d, 4, &q, &s, MaskMode::Uniform, &mut seeded(3)).unwrap();
        let rate = out.iter().filter(|&&y| y).count() as f64 / out.len() as f64;
        let p = 1.0 / 16.0;
        assert!((rate - p).abs() < 4.0 * (p * (1.0 - p) / out.len() as f64).sqrt());
    }

    #[test]
    fn prior_mask_keeps_marginal_match_rate() {
        // With L inside S, prior sampling redraws the whole queried tuple
        // from its empirical law, so the match rate stays near the truth.
        let d = data(100_000);
        let q = Query::new(LocusSet::new(vec![2, 3]).unwrap(), vec![0, 0]).unwrap();
        let s = LocusSet::new(vec![2, 3]).unwrap();
        let truth = d.iter().filter(|x| q.true_answer(x)).count() as f64 / d.len() as f64;
        let out = mask_and_sample_baseline(&d, 4, &q, &s, MaskMode::Prior, &mut seeded(4)).unwrap();
        let rate = out.iter().filter(|&&y| y).count() as f64 / out.len() as f64;
        assert!((rate - truth).abs() < 4.0 * (truth * (1.0 - truth) / d.len() as f64).sqrt());
    }
}
