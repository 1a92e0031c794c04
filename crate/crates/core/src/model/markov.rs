use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{check_table_size, check_values, sample_index, JointTable, LocusSet, Sequence, SequenceModel};
use crate::{Error, Result};

const ROW_TOLERANCE: f64 = 1e-12;

/// First-order Markov chain over positions 1..=N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChainModel {
    length: usize,
    alphabet_size: usize,
    initial: Vec<f64>,
    /// Row-major `alphabet_size x alphabet_size`, row = current symbol.
    transition: Vec<f64>,
    /// Stay probability when built from the symmetric parametrisation.
    stay: Option<f64>,
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::invalid(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl MarkovChainModel {
    pub fn new(length: usize, initial: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        let c = initial.len();
        if c < 2 {
            return Err(Error::invalid("alphabet needs at least two symbols"));
        }
        if length == 0 {
            return Err(Error::invalid("sequence length must be positive"));
        }
        if transition.len() != c * c {
            return Err(Error::DimensionMismatch {
                expected: c * c,
                got: transition.len(),
            });
        }
        check_pmf(&initial, "initial distribution")?;
        for (i, row) in transition.chunks(c).enumerate() {
            check_pmf(row, &format!("transition row {i}"))?;
        }
        Ok(MarkovChainModel {
            length,
            alphabet_size: c,
            initial,
            transition,
            stay: None,
        })
    }

    /// Symmetric chain: stay with probability `stay`, otherwise move to each
    /// other symbol with probability `(1 - stay) / (C - 1)`.
    pub fn symmetric(length: usize, initial: Vec<f64>, stay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&stay) {
            return Err(Error::invalid(format!("stay probability {stay} not in [0, 1]")));
        }
        let c = initial.len();
        let off = if c > 1 { (1.0 - stay) / (c - 1) as f64 } else { 0.0 };
        let mut transition = vec![off; c * c];
        for i in 0..c {
            transition[i * c + i] = stay;
        }
        let mut m = Self::new(length, initial, transition)?;
        m.stay = Some(stay);
        Ok(m)
    }

    pub fn uniform_initial(alphabet_size: usize) -> Vec<f64> {
        vec![1.0 / alphabet_size as f64; alphabet_size]
    }

    /// Independent, uniformly distributed positions.
    pub fn iid_uniform(length: usize, alphabet_size: usize) -> Result<Self> {
        Self::symmetric(
            length,
            Self::uniform_initial(alphabet_size),
            1.0 / alphabet_size as f64,
        )
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn stay(&self) -> Option<f64> {
        self.stay
    }

    fn step(&self, dist: &[f64], out: &mut [f64]) {
        let c = self.alphabet_size;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (x, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = &self.transition[x * c..(x + 1) * c];
            for (y, &t) in row.iter().enumerate() {
                out[y] += p * t;
            }
        }
    }
}

impl SequenceModel for MarkovChainModel {
    fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    fn length(&self) -> usize {
        self.length
    }

    /// Forward elimination over positions up to the last requested locus.
    /// The state is indexed by (prefix of fixed values, current symbol).
    fn joint_table(&self, loci: &LocusSet) -> Result<JointTable> {
        loci.check_within(self.length)?;
        check_table_size(loci)?;
        let c = self.alphabet_size;
        let Some(&last) = loci.indices().last() else {
            return Ok(JointTable::from_parts(LocusSet::empty(), c, vec![1.0]));
        };
        let mut prefixes = 1usize;
        let mut state = vec![0.0; c];
        state.copy_from_slice(&self.initial);
        let mut buf = vec![0.0; c];
        for pos in 1..=last {
            if pos > 1 {
                let mut next = vec![0.0; state.len()];
                for p in 0..prefixes {
                    self.step(&state[p * c..(p + 1) * c], &mut buf);
                    next[p * c..(p + 1) * c].copy_from_slice(&buf);
                }
                state = next;
            }
            if loci.contains(pos) {
                let mut expanded = vec![0.0; prefixes * c * c];
                for p in 0..prefixes {
                    for x in 0..c {
                        let np = p * c + x;
                        expanded[np * c + x] = state[p * c + x];
                    }
                }
                prefixes *= c;
                state = expanded;
            }
        }
        let probs = state.chunks(c).map(|row| row.iter().sum()).collect();
        Ok(JointTable::from_parts(loci.clone(), c, probs))
    }

    fn joint_prob(&self, loci: &LocusSet, values: &[u8]) -> Result<f64> {
        check_values(self, loci, values)?;
        let Some(&last) = loci.indices().last() else {
            return Ok(1.0);
        };
        let c = self.alphabet_size;
        let mut dist = self.initial.clone();
        let mut buf = vec![0.0; c];
        let mut next_fixed = 0;
        for pos in 1..=last {
            if pos > 1 {
                self.step(&dist, &mut buf);
                std::mem::swap(&mut dist, &mut buf);
            }
            if loci.indices()[next_fixed] == pos {
                let keep = values[next_fixed] as usize;
                for (x, p) in dist.iter_mut().enumerate() {
                    if x != keep {
                        *p = 0.0;
                    }
                }
                next_fixed += 1;
            }
        }
        Ok(dist.iter().sum())
    }

    fn sample_sequence(&self, rng: &mut dyn RngCore) -> Sequence {
        let c = self.alphabet_size;
        let mut values = Vec::with_capacity(self.length);
        let mut current = sample_index(&self.initial, rng);
        values.push(current as u8);
        for _ in 1..self.length {
            current = sample_index(&self.transition[current * c..(current + 1) * c], rng);
            values.push(current as u8);
        }
        Sequence::from_raw(values)
    }

    fn describe(&self) -> String {
        match self.stay {
            Some(phi) => format!("markov(N={};phi={phi})", self.length),
            None => format!("markov(N={};custom)", self.length),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::conditional_prob;
    use crate::rng::seeded;

    fn uniform(phi: f64) -> MarkovChainModel {
        MarkovChainModel::symmetric(10, MarkovChainModel::uniform_initial(4), phi).unwrap()
    }

    fn loci(v: &[usize]) -> LocusSet {
        LocusSet::new(v.to_vec()).unwrap()
    }

    /// Explicit distribution of X_pos by repeated vector-matrix products.
    fn marginal_by_matrix_powers(m: &MarkovChainModel, pos: usize) -> Vec<f64> {
        let c = m.alphabet_size();
        let mut d = m.initial().to_vec();
        for _ in 1..pos {
            let mut n = vec![0.0; c];
            for x in 0..c {
                for y in 0..c {
                    n[y] += d[x] * m.transition()[x * c + y];
                }
            }
            d = n;
        }
        d
    }

    #[test]
    fn joint_prob_examples() {
        let m = uniform(0.25);
        assert!((m.joint_prob(&loci(&[1, 2]), &[0, 1]).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        let m = uniform(1.0);
        assert!((m.joint_prob(&loci(&[1, 5]), &[0, 0]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(m.joint_prob(&loci(&[1, 5]), &[0, 1]).unwrap(), 0.0);
        let m = uniform(0.7);
        let oracle = marginal_by_matrix_powers(&m, 2)[0];
        assert!((oracle - 0.25).abs() < 1e-15);
        assert!((m.joint_prob(&loci(&[2]), &[0]).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn conditional_examples() {
        let m = uniform(0.7);
        let c = conditional_prob(&m, &loci(&[2]), &[0], &loci(&[1]), &[0]).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        let c = conditional_prob(&m, &loci(&[2]), &[0], &loci(&[1]), &[1]).unwrap();
        assert!((c - 0.1).abs() < 1e-12);
        let c = conditional_prob(&m, &LocusSet::empty(), &[], &loci(&[1]), &[1]).unwrap();
        assert_eq!(c, 1.0);
        let m = uniform(1.0);
        assert!(matches!(
            conditional_prob(&m, &loci(&[1]), &[0], &loci(&[2, 3]), &[0, 1]),
            Err(Error::ZeroProbability)
        ));
    }

    #[test]
    fn table_matches_pointwise_evaluation() {
        let m = MarkovChainModel::new(
            6,
            vec![0.1, 0.2, 0.3, 0.4],
            vec![
                0.5, 0.2, 0.2, 0.1, //
                0.1, 0.6, 0.2, 0.1, //
                0.3, 0.3, 0.3, 0.1, //
                0.0, 0.1, 0.2, 0.7,
            ],
        )
        .unwrap();
        let l = loci(&[2, 3, 6]);
        let t = m.joint_table(&l).unwrap();
        for i in 0..t.probs().len() {
            let v = t.index().decode(i);
            assert!((t.probs()[i] - m.joint_prob(&l, &v).unwrap()).abs() < 1e-15);
        }
        assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors_and_capacity() {
        let m = uniform(0.5);
        assert!(matches!(
            m.joint_prob(&loci(&[11]), &[0]),
            Err(Error::LocusOutOfRange { .. })
        ));
        assert!(matches!(
            m.joint_prob(&loci(&[1, 2]), &[0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let big = MarkovChainModel::iid_uniform(20, 4).unwrap();
        let err = big.joint_table(&LocusSet::parse("1-13").unwrap()).unwrap_err();
        assert!(err.is_capacity());
        assert!(MarkovChainModel::symmetric(5, vec![0.5, 0.6], 0.5).is_err());
        assert!(MarkovChainModel::symmetric(5, vec![0.5, 0.5], 1.5).is_err());
    }

    #[test]
    fn fully_dependent_chain_samples_constant_rows() {
        let m = uniform(1.0);
        let mut rng = seeded(3);
        for _ in 0..50 {
            let s = m.sample_sequence(&mut rng);
            assert!(s.values().iter().all(|&v| v == s.values()[0]));
        }
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let m = uniform(0.6);
        let a = m.sample_sequence(&mut seeded(11));
        let b = m.sample_sequence(&mut seeded(11));
        assert_eq!(a, b);
    }
}
