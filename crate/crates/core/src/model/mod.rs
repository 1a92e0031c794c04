//! Sequence priors and exact probability evaluation over locus subsets.

mod alphabet;
mod dataset;
mod hmm;
mod joint;
mod loci;
mod markov;
mod tabular;

pub use alphabet::{Alphabet, Sequence};
pub use dataset::{parse_dataset, read_dataset, render_dataset, write_dataset, Dataset};
pub use hmm::{hmm_generate, HmmGeneratorConfig};
pub use joint::JointTable;
pub use loci::{LocusSet, Query, TupleIndex};
pub use markov::MarkovChainModel;
pub use tabular::TabularModel;

use rand::{Rng, RngCore};

use crate::{Error, Result};

/// Largest locus set for which a dense joint table is materialised.
pub const MAX_TABLE_LOCI: usize = 12;

/// A probability law over length-N sequences.
///
/// Implementations are immutable after construction; sampling takes a
/// caller-owned generator so models can be shared across threads.
pub trait SequenceModel: Send + Sync + std::fmt::Debug {
    fn alphabet_size(&self) -> usize;

    /// Sequence length N.
    fn length(&self) -> usize;

    /// Dense joint pmf of the values at `loci`.
    fn joint_table(&self, loci: &LocusSet) -> Result<JointTable>;

    /// P(X_loci = values).
    fn joint_prob(&self, loci: &LocusSet, values: &[u8]) -> Result<f64> {
        check_values(self, loci, values)?;
        Ok(self.joint_table(loci)?.prob(values))
    }

    fn sample_sequence(&self, rng: &mut dyn RngCore) -> Sequence;

    /// Short parameter label used in CSV output.
    fn describe(&self) -> String;
}

pub(crate) fn check_values<M: SequenceModel + ?Sized>(
    model: &M,
    loci: &LocusSet,
    values: &[u8],
) -> Result<()> {
    loci.check_within(model.length())?;
    if loci.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: loci.len(),
            got: values.len(),
        });
    }
    if let Some(v) = values.iter().find(|&&v| v as usize >= model.alphabet_size()) {
        return Err(Error::invalid(format!("symbol index {v} outside alphabet")));
    }
    Ok(())
}

pub(crate) fn check_table_size(loci: &LocusSet) -> Result<()> {
    if loci.len() > MAX_TABLE_LOCI {
        return Err(Error::Capacity {
            what: "joint table",
            needed: loci.len(),
            limit: MAX_TABLE_LOCI,
            hint: "reduce the number of queried and sensitive loci",
        });
    }
    Ok(())
}

/// P(X_target = target_values | X_given = given_values).
pub fn conditional_prob<M: SequenceModel + ?Sized>(
    model: &M,
    target: &LocusSet,
    target_values: &[u8],
    given: &LocusSet,
    given_values: &[u8],
) -> Result<f64> {
    check_values(model, target, target_values)?;
    check_values(model, given, given_values)?;
    if !target.is_disjoint(given) {
        return Err(Error::invalid("target and conditioning loci must be disjoint"));
    }
    if target.is_empty() {
        return Ok(1.0);
    }
    let denominator = model.joint_prob(given, given_values)?;
    if denominator <= 0.0 {
        return Err(Error::ZeroProbability);
    }
    let union = target.union(given);
    let mut values = vec![0u8; union.len()];
    for (p, &v) in target.positions_in(&union).into_iter().zip(target_values) {
        values[p] = v;
    }
    for (p, &v) in given.positions_in(&union).into_iter().zip(given_values) {
        values[p] = v;
    }
    Ok(model.joint_prob(&union, &values)? / denominator)
}

/// Probability that the sensitive part of the query mismatches the
/// reference: 1 - P(X_{L∩S} = v_{L∩S}), and 0 when L∩S is empty.
pub fn mismatch_prob<M: SequenceModel + ?Sized>(
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
) -> Result<f64> {
    let overlap = query.loci().intersection(sensitive);
    if overlap.is_empty() {
        return Ok(0.0);
    }
    let p = model.joint_prob(&overlap, &query.reference_on(&overlap))?;
    Ok((1.0 - p).max(0.0))
}

/// Index drawn from `probs` (which should sum to one; the last positive
/// entry absorbs rounding).
pub fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}
