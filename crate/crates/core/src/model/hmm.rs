//! Copy-with-switching generator that synthesises an experimental dataset
//! from a reference dataset.
//!
//! Each output row starts from a uniformly chosen reference row. Before every
//! locus after the first, the copy source stays on its current row with
//! probability `switch_keep_prob` and otherwise jumps to one of the other
//! rows uniformly (the jump persists for later loci). The copied symbol is
//! then replaced by a uniform alphabet draw with probability
//! `substitution_prob`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Sequence;
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmGeneratorConfig {
    pub reference: Vec<Sequence>,
    pub alphabet_size: usize,
    pub switch_keep_prob: f64,
    pub substitution_prob: f64,
    pub seed: u64,
}

impl HmmGeneratorConfig {
    fn validate(&self) -> Result<usize> {
        let first = self
            .reference
            .first()
            .ok_or_else(|| Error::invalid("reference dataset is empty"))?;
        let n = first.len();
        if self.reference.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("reference rows have different lengths"));
        }
        for (name, p) in [
            ("switch_keep_prob", self.switch_keep_prob),
            ("substitution_prob", self.substitution_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} not in [0, 1]")));
            }
        }
        if self.reference.len() == 1 && self.switch_keep_prob < 1.0 {
            return Err(Error::invalid(
                "a single reference row leaves no switch target; use switch_keep_prob = 1",
            ));
        }
        Ok(n)
    }
}

pub fn hmm_generate(config: &HmmGeneratorConfig, count: usize) -> Result<Vec<Sequence>> {
    let length = config.validate()?;
    if count == 0 {
        return Err(Error::invalid("requested zero sequences"));
    }
    let rows = config.reference.len();
    let c = config.alphabet_size;
    let mut rng = seeded(config.seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = rng.random_range(0..rows);
        let mut values = Vec::with_capacity(length);
        for j in 0..length {
            if j > 0 && rng.random::<f64>() >= config.switch_keep_prob {
                // uniform over the other rows
                let other = rng.random_range(0..rows - 1);
                row = if other >= row { other + 1 } else { other };
            }
            let mut symbol = config.reference[row].values()[j];
            if rng.random::<f64>() < config.substitution_prob {
                symbol = rng.random_range(0..c) as u8;
            }
            values.push(symbol);
        }
        out.push(Sequence::new(values, c)?);
    }
    Ok(out)
}
