use serde::{Deserialize, Serialize};

use super::Sequence;
use crate::{Error, Result};

/// Strictly increasing set of 1-based sequence positions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocusSet(Vec<usize>);

impl LocusSet {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::invalid("loci are 1-based; 0 is not a valid locus"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!(
                "loci must be strictly increasing without duplicates: {indices:?}"
            )));
        }
        Ok(LocusSet(indices))
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices)
    }

    pub fn empty() -> Self {
        LocusSet(Vec::new())
    }

    /// Parses `3,4` or `3-6` style lists (ranges are inclusive).
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let parse_one = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad locus '{s}'")))
            };
            if let Some((lo, hi)) = part.split_once('-') {
                let (lo, hi) = (parse_one(lo)?, parse_one(hi)?);
                if lo > hi {
                    return Err(Error::invalid(format!("empty locus range '{part}'")));
                }
                out.extend(lo..=hi);
            } else {
                out.push(parse_one(part)?);
            }
        }
        Self::new(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, locus: usize) -> bool {
        self.0.binary_search(&locus).is_ok()
    }

    pub fn check_within(&self, length: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last > length => Err(Error::LocusOutOfRange {
                locus: last,
                length,
            }),
            _ => Ok(()),
        }
    }

    pub fn union(&self, other: &LocusSet) -> LocusSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        LocusSet(v)
    }

    pub fn intersection(&self, other: &LocusSet) -> LocusSet {
        LocusSet(self.0.iter().copied().filter(|&l| other.contains(l)).collect())
    }

    pub fn difference(&self, other: &LocusSet) -> LocusSet {
        LocusSet(self.0.iter().copied().filter(|&l| !other.contains(l)).collect())
    }

    pub fn is_disjoint(&self, other: &LocusSet) -> bool {
        self.0.iter().all(|&l| !other.contains(l))
    }

    pub fn is_subset(&self, other: &LocusSet) -> bool {
        self.0.iter().all(|&l| other.contains(l))
    }

    /// Position of each of `self`'s loci inside `superset`. Panics if a locus
    /// is missing, so callers must pass a true superset.
    pub fn positions_in(&self, superset: &LocusSet) -> Vec<usize> {
        self.0
            .iter()
            .map(|l| {
                superset
                    .0
                    .binary_search(l)
                    .expect("locus missing from superset")
            })
            .collect()
    }

    pub fn extract(&self, sequence: &Sequence) -> Vec<u8> {
        self.0.iter().map(|&l| sequence.at(l)).collect()
    }
}

impl std::fmt::Display for LocusSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Count query: "does the user hold `reference` at `loci`?"
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    loci: LocusSet,
    reference: Vec<u8>,
}

impl Query {
    pub fn new(loci: LocusSet, reference: Vec<u8>) -> Result<Self> {
        if loci.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: loci.len(),
                got: reference.len(),
            });
        }
        Ok(Query { loci, reference })
    }

    pub fn loci(&self) -> &LocusSet {
        &self.loci
    }

    pub fn reference(&self) -> &[u8] {
        &self.reference
    }

    /// Reference symbols restricted to `subset` (which must lie inside the
    /// query loci).
    pub fn reference_on(&self, subset: &LocusSet) -> Vec<u8> {
        subset
            .positions_in(&self.loci)
            .into_iter()
            .map(|p| self.reference[p])
            .collect()
    }

    /// The per-user true answer: 1 when the sequence matches the reference on
    /// every queried locus (vacuously 1 for an empty query).
    pub fn true_answer(&self, sequence: &Sequence) -> bool {
        self.loci
            .iter()
            .zip(&self.reference)
            .all(|(l, &v)| sequence.at(l) == v)
    }
}

/// Mixed-radix encoding of value tuples, first position most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleIndex {
    radix: usize,
    width: usize,
}

impl TupleIndex {
    pub fn new(radix: usize, width: usize) -> Self {
        TupleIndex { radix, width }
    }

    pub fn radix(&self) -> usize {
        self.radix
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn count(&self) -> usize {
        self.radix.pow(self.width as u32)
    }

    pub fn encode(&self, values: &[u8]) -> usize {
        debug_assert_eq!(values.len(), self.width);
        values
            .iter()
            .fold(0usize, |acc, &v| acc * self.radix + v as usize)
    }

    pub fn decode(&self, mut index: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.width];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.radix) as u8;
            index /= self.radix;
        }
        out
    }

    /// Encodes the sub-tuple at `positions` of `values`.
    pub fn encode_at(&self, values: &[u8], positions: &[usize]) -> usize {
        positions
            .iter()
            .fold(0usize, |acc, &p| acc * self.radix + values[p] as usize)
    }
}
