use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::LocalAnalysis;
use crate::model::{Alphabet, LocusSet, Query, Sequence, SequenceModel, TupleIndex};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    /// Releases 1 only on a non-sensitive match, thinned by the dependence ratio.
    M1,
    /// Releases 1 on a non-sensitive match, otherwise with probability 1 - R.
    M2,
    /// A release table supplied from outside (e.g. loaded from a file).
    Custom,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::M1 => "m1",
            MechanismKind::M2 => "m2",
            MechanismKind::Custom => "custom",
        })
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" => Ok(MechanismKind::M1),
            "m2" => Ok(MechanismKind::M2),
            "custom" => Ok(MechanismKind::Custom),
            other => Err(Error::invalid(format!("unknown local mechanism '{other}'"))),
        }
    }
}

/// Probability mass of the two error types for one user.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorSplit {
    /// P(A = 1, Y = 0).
    pub missed: f64,
    /// P(A = 0, Y = 1).
    pub false_alarm: f64,
}

impl ErrorSplit {
    pub fn total(&self) -> f64 {
        self.missed + self.false_alarm
    }
}

/// Release table P(Y = 1 | x_L̄, x_S) for a fixed query and sensitive set.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMechanism {
    kind: MechanismKind,
    query: Query,
    sensitive: LocusSet,
    lbar: LocusSet,
    lbar_index: TupleIndex,
    s_index: TupleIndex,
    table: Vec<f64>,
    ratios: Vec<f64>,
    mismatch: f64,
}

pub fn build_mechanism<M: SequenceModel + ?Sized>(
    kind: MechanismKind,
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
) -> Result<LocalMechanism> {
    let analysis = LocalAnalysis::new(model, query, sensitive)?;
    LocalMechanism::from_analysis(kind, &analysis)
}

impl LocalMechanism {
    pub fn from_analysis(kind: MechanismKind, a: &LocalAnalysis) -> Result<Self> {
        if kind == MechanismKind::Custom {
            return Err(Error::invalid("custom mechanisms must be built from a table"));
        }
        let s_count = a.s_count();
        let mut ratios = vec![0.0; a.lbar_count() * s_count];
        for (li, row) in ratios.chunks_mut(s_count).enumerate() {
            for (si, r) in row.iter_mut().enumerate() {
                *r = a.ratio(li, si);
            }
        }
        let favourable = a.mismatch <= 0.5;
        let table = ratios
            .iter()
            .enumerate()
            .map(|(cell, &r)| {
                let on_reference = cell / s_count == a.v_lbar && favourable;
                match kind {
                    MechanismKind::M1 if on_reference => r,
                    MechanismKind::M1 => 0.0,
                    MechanismKind::M2 if on_reference => 1.0,
                    MechanismKind::M2 => 1.0 - r,
                    MechanismKind::Custom => unreachable!("custom tables come from from_table"),
                }
            })
            .collect();
        Ok(LocalMechanism {
            kind,
            query: a.query.clone(),
            sensitive: a.sensitive.clone(),
            lbar: a.lbar.clone(),
            lbar_index: a.lbar_index,
            s_index: a.s_index,
            table,
            ratios,
            mismatch: a.mismatch,
        })
    }

    /// Wraps an externally supplied release table (row-major over
    /// `(x_L̄, x_S)` codes). Ratios are unknown and reported as NaN.
    pub fn from_table(
        query: Query,
        sensitive: LocusSet,
        alphabet_size: usize,
        table: Vec<f64>,
    ) -> Result<Self> {
        let lbar = query.loci().difference(&sensitive);
        let lbar_index = TupleIndex::new(alphabet_size, lbar.len());
        let s_index = TupleIndex::new(alphabet_size, sensitive.len());
        let cells = lbar_index.count() * s_index.count();
        if table.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                got: table.len(),
            });
        }
        if let Some(bad) = table.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("release probability {bad} not in [0, 1]")));
        }
        Ok(LocalMechanism {
            kind: MechanismKind::Custom,
            query,
            sensitive,
            lbar,
            lbar_index,
            s_index,
            ratios: vec![f64::NAN; cells],
            table,
            mismatch: f64::NAN,
        })
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn sensitive(&self) -> &LocusSet {
        &self.sensitive
    }

    /// Non-sensitive queried loci.
    pub fn lbar(&self) -> &LocusSet {
        &self.lbar
    }

    pub fn mismatch(&self) -> f64 {
        self.mismatch
    }

    pub fn lbar_index(&self) -> TupleIndex {
        self.lbar_index
    }

    pub fn s_index(&self) -> TupleIndex {
        self.s_index
    }

    pub fn s_count(&self) -> usize {
        self.s_index.count()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn release_prob(&self, lbar: usize, s: usize) -> f64 {
        self.table[lbar * self.s_count() + s]
    }

    pub fn ratio(&self, lbar: usize, s: usize) -> f64 {
        self.ratios[lbar * self.s_count() + s]
    }

    /// Overwrites one cell; the mechanism becomes [`MechanismKind::Custom`].
    pub fn set_release_prob(&mut self, lbar: usize, s: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!("release probability {value} not in [0, 1]")));
        }
        let cell = lbar * self.s_count() + s;
        *self
            .table
            .get_mut(cell)
            .ok_or_else(|| Error::invalid("cell index out of range"))? = value;
        self.kind = MechanismKind::Custom;
        Ok(())
    }

    /// Cell codes for a user's sequence.
    pub fn cell_of(&self, sequence: &Sequence) -> (usize, usize) {
        (
            self.lbar_index.encode(&self.lbar.extract(sequence)),
            self.s_index.encode(&self.sensitive.extract(sequence)),
        )
    }

    pub fn release_prob_for(&self, sequence: &Sequence) -> f64 {
        let (l, s) = self.cell_of(sequence);
        self.release_prob(l, s)
    }

    /// Exact per-user error masses under the prior summarised by `analysis`,
    /// by direct summation over cells (independent of the closed forms).
    pub fn error_split(&self, analysis: &LocalAnalysis) -> ErrorSplit {
        let s_count = self.s_count();
        let mut split = ErrorSplit::default();
        for (cell, &p) in analysis.joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mu = self.table[cell];
            if analysis.answer(cell / s_count, cell % s_count) {
                split.missed += p * (1.0 - mu);
            } else {
                split.false_alarm += p * mu;
            }
        }
        split
    }

    /// CSV rendering: `lbar,sensitive,release_prob` with tuples written as
    /// symbol strings (`-` for the empty tuple).
    pub fn to_table_csv(&self, alphabet: &Alphabet) -> String {
        let tuple = |t: Vec<u8>| {
            if t.is_empty() {
                "-".to_string()
            } else {
                alphabet.render(&t)
            }
        };
        let mut out = String::from("lbar,sensitive,release_prob\n");
        for (cell, p) in self.table.iter().enumerate() {
            let l = self.lbar_index.decode(cell / self.s_count());
            let s = self.s_index.decode(cell % self.s_count());
            out.push_str(&format!("{},{},{p:?}\n", tuple(l), tuple(s)));
        }
        out
    }

    /// Parses [`to_table_csv`](Self::to_table_csv) output. Every cell must be
    /// listed exactly once.
    pub fn from_table_csv(
        text: &str,
        query: Query,
        sensitive: LocusSet,
        alphabet: &Alphabet,
    ) -> Result<Self> {
        let lbar = query.loci().difference(&sensitive);
        let c = alphabet.size();
        let lbar_index = TupleIndex::new(c, lbar.len());
        let s_index = TupleIndex::new(c, sensitive.len());
        let s_count = s_index.count();
        let mut table = vec![f64::NAN; lbar_index.count() * s_count];
        let parse_tuple = |field: &str, width: usize, line: usize| -> Result<usize> {
            let values = if field == "-" {
                vec![]
            } else {
                alphabet.parse_values(field).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?
            };
            if values.len() != width {
                return Err(Error::Parse {
                    line,
                    message: format!("tuple '{field}' should have {width} symbols"),
                });
            }
            Ok(TupleIndex::new(c, width).encode(&values))
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || (i == 0 && raw.starts_with("lbar")) {
                continue;
            }
            let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected lbar,sensitive,release_prob".into(),
                });
            }
            let l = parse_tuple(fields[0], lbar.len(), line)?;
            let s = parse_tuple(fields[1], sensitive.len(), line)?;
            let p: f64 = fields[2].parse().map_err(|_| Error::Parse {
                line,
                message: format!("bad probability '{}'", fields[2]),
            })?;
            let slot = &mut table[l * s_count + s];
            if !slot.is_nan() {
                return Err(Error::Parse {
                    line,
                    message: "cell listed twice".into(),
                });
            }
            *slot = p;
        }
        if table.iter().any(|p| p.is_nan()) {
            return Err(Error::invalid("release table does not cover every cell"));
        }
        Self::from_table(query, sensitive, c, table)
    }
}

/// One Bernoulli draw with the mechanism's release probability for the
/// user's cell.
pub fn release(mech: &LocalMechanism, sequence: &Sequence, rng: &mut dyn RngCore) -> bool {
    let p = mech.release_prob_for(sequence);
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

pub fn true_answer(query: &Query, sequence: &Sequence) -> bool {
    query.true_answer(sequence)
}
