use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ordered set of single-character symbols. Symbols are referred to by their
/// index everywhere else in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Default for Alphabet {
    /// The nucleotide alphabet `A, T, G, C` (indices 0..4 in that order).
    fn default() -> Self {
        Alphabet {
            symbols: vec!['A', 'T', 'G', 'C'],
        }
    }
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::invalid("alphabet needs at least two symbols"));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::invalid(format!("duplicate alphabet symbol '{s}'")));
            }
            if s.is_whitespace() || *s == ',' {
                return Err(Error::invalid(format!("unusable alphabet symbol {s:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    pub fn from_str_symbols(s: &str) -> Result<Self> {
        Self::new(s.chars().collect())
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<u8> {
        self.symbols.iter().position(|&s| s == c).map(|i| i as u8)
    }

    pub fn symbol(&self, index: u8) -> char {
        self.symbols[index as usize]
    }

    /// Parses a comma separated or contiguous run of symbols (`A,T` or `AT`).
    pub fn parse_values(&self, text: &str) -> Result<Vec<u8>> {
        text.chars()
            .filter(|c| *c != ',' && !c.is_whitespace())
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::invalid(format!("symbol '{c}' is not in the alphabet")))
            })
            .collect()
    }

    pub fn render(&self, values: &[u8]) -> String {
        values.iter().map(|&v| self.symbol(v)).collect()
    }
}

/// One user's sequence as alphabet indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sequence(Vec<u8>);

impl Sequence {
    pub fn new(values: Vec<u8>, alphabet_size: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("sequence must have at least one position"));
        }
        if let Some(bad) = values.iter().find(|&&v| v as usize >= alphabet_size) {
            return Err(Error::invalid(format!(
                "symbol index {bad} outside alphabet of size {alphabet_size}"
            )));
        }
        Ok(Sequence(values))
    }

    /// Wraps values that the caller already knows to be in range.
    pub(crate) fn from_raw(values: Vec<u8>) -> Self {
        Sequence(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    /// Value at a 1-based locus.
    pub fn at(&self, locus: usize) -> u8 {
        self.0[locus - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_alphabet_is_atgc() {
        let a = Alphabet::default();
        assert_eq!(a.size(), 4);
        assert_eq!(a.index_of('G'), Some(2));
        assert_eq!(a.parse_values("A,T").unwrap(), vec![0, 1]);
        assert_eq!(a.render(&[3, 0]), "CA");
    }

    #[test]
    fn rejects_bad_alphabets_and_sequences() {
        assert!(Alphabet::new(vec!['A']).is_err());
        assert!(Alphabet::new(vec!['A', 'A']).is_err());
        assert!(Sequence::new(vec![], 4).is_err());
        assert!(Sequence::new(vec![0, 4], 4).is_err());
        assert!(Alphabet::default().parse_values("AX").is_err());
    }
}
