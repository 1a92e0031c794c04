//! `key = value` experiment plans.
//!
//! ```text
//! # comment
//! scenario = fig3a
//! model = markov
//! phi = 0.25:1.0:0.05
//! loci = 5,6
//! values = A,T
//! sensitive = 3,4
//! ```
//!
//! Grids are comma lists or inclusive `lo:hi:step` ranges.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::model::{Alphabet, LocusSet, MarkovChainModel, Query};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismId {
    M1,
    M2,
    Central,
    Rr,
    Laplace,
    MaskUniform,
    MaskPrior,
}

impl MechanismId {
    pub const ALL: [MechanismId; 7] = [
        MechanismId::M1,
        MechanismId::M2,
        MechanismId::Central,
        MechanismId::Rr,
        MechanismId::Laplace,
        MechanismId::MaskUniform,
        MechanismId::MaskPrior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismId::M1 => "m1",
            MechanismId::M2 => "m2",
            MechanismId::Central => "central",
            MechanismId::Rr => "rr",
            MechanismId::Laplace => "laplace",
            MechanismId::MaskUniform => "mask_uniform",
            MechanismId::MaskPrior => "mask_prior",
        }
    }

    /// Stable label for RNG substreams.
    pub(crate) fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown mechanism '{s}'")))
    }
}

/// How the Markov grid is written in the plan: the stay probability φ or
/// the per-target move probability b = (1 - φ) / (C - 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkovParam {
    Phi,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Markov {
        initial: Vec<f64>,
        param: MarkovParam,
        grid: Vec<f64>,
    },
    Hmm {
        reference_rows: usize,
        pis: Vec<f64>,
        thetas: Vec<f64>,
        smoothing: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub scenario: String,
    pub alphabet: Alphabet,
    pub model: ModelSpec,
    pub users: usize,
    pub length: usize,
    pub query: Query,
    /// Sensitive loci before any overlap extension.
    pub sensitive: LocusSet,
    /// Each entry adds the first `o` queried loci to `sensitive`; empty
    /// means `sensitive` alone.
    pub overlaps: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub mechanisms: Vec<MechanismId>,
}

/// One grid point of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanPoint {
    pub label: String,
    /// Markov stay probability, or (π, θ) for the HMM path.
    pub model: PointModel,
    pub sensitive: LocusSet,
    pub overlap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointModel {
    Markov { phi: f64 },
    Hmm { pi: f64, theta: f64 },
}

/// Rounds grid values so that `0.25 + 3 * 0.05` prints as `0.4`.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad number '{s}' in grid '{text}'")))
    };
    let values = match parts.as_slice() {
        [single] => single.split(',').map(num).collect::<Result<Vec<_>>>()?,
        [lo, hi, step] => {
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::invalid(format!("bad range '{text}'")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| tidy(lo + i as f64 * step)).collect()
        }
        _ => return Err(Error::invalid(format!("bad grid '{text}'"))),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("empty or non-finite grid '{text}'")));
    }
    Ok(values)
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::invalid(format!("expected a non-negative integer, got {v}")))
            }
        })
        .collect()
}

fn check_probabilities(name: &str, values: &[f64]) -> Result<()> {
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("{name} value {v} not in [0, 1]")));
    }
    Ok(())
}

impl ExperimentPlan {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        text.parse()
    }

    /// Expands the model grid and overlap schedule, overlap innermost.
    pub fn points(&self) -> Vec<PlanPoint> {
        let models: Vec<(String, PointModel)> = match &self.model {
            ModelSpec::Markov { param, grid, .. } => {
                let c = self.alphabet.size() as f64;
                grid.iter()
                    .map(|&g| match param {
                        MarkovParam::Phi => (format!("phi={g}"), PointModel::Markov { phi: g }),
                        MarkovParam::B => (
                            format!("b={g}"),
                            PointModel::Markov { phi: tidy(1.0 - (c - 1.0) * g) },
                        ),
                    })
                    .collect()
            }
            ModelSpec::Hmm { pis, thetas, .. } => thetas
                .iter()
                .flat_map(|&theta| {
                    pis.iter().map(move |&pi| {
                        (format!("pi={pi};theta={theta}"), PointModel::Hmm { pi, theta })
                    })
                })
                .collect(),
        };
        let overlaps: Vec<Option<usize>> = if self.overlaps.is_empty() {
            vec![None]
        } else {
            self.overlaps.iter().map(|&o| Some(o)).collect()
        };
        let mut points = Vec::new();
        for (label, model) in models {
            for &o in &overlaps {
                let (label, sensitive) = match o {
                    None => (label.clone(), self.sensitive.clone()),
                    Some(o) => {
                        let extra = LocusSet::new(self.query.loci().indices()[..o].to_vec())
                            .expect("prefix of a locus set is valid");
                        (format!("{label};overlap={o}"), self.sensitive.union(&extra))
                    }
                };
                points.push(PlanPoint { label, model, sensitive, overlap: o });
            }
        }
        points
    }

    pub fn runs(&self, m: MechanismId) -> bool {
        self.mechanisms.contains(&m)
    }

    fn validate(&self) -> Result<()> {
        if self.users == 0 {
            return Err(Error::invalid("users must be >= 1"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::invalid("no mechanisms selected"));
        }
        self.query.loci().check_within(self.length)?;
        self.sensitive.check_within(self.length)?;
        if let Some(&o) = self.overlaps.iter().find(|&&o| o > self.query.loci().len()) {
            return Err(Error::invalid(format!(
                "overlap {o} exceeds the {} queried loci",
                self.query.loci().len()
            )));
        }
        match &self.model {
            ModelSpec::Markov { initial, param, grid } => {
                if initial.len() != self.alphabet.size() {
                    return Err(Error::DimensionMismatch {
                        expected: self.alphabet.size(),
                        got: initial.len(),
                    });
                }
                let bound = match param {
                    MarkovParam::Phi => 1.0,
                    MarkovParam::B => 1.0 / (self.alphabet.size() as f64 - 1.0),
                };
                if let Some(v) = grid.iter().find(|v| !(0.0..=bound + 1e-12).contains(*v)) {
                    return Err(Error::invalid(format!("markov grid value {v} outside [0, {bound}]")));
                }
                MarkovChainModel::new(
                    1,
                    initial.clone(),
                    MarkovChainModel::uniform_initial(self.alphabet.size()).repeat(self.alphabet.size()),
                )?;
            }
            ModelSpec::Hmm { reference_rows, pis, thetas, .. } => {
                check_probabilities("pi", pis)?;
                check_probabilities("theta", thetas)?;
                if *reference_rows < 2 {
                    return Err(Error::invalid("hmm needs at least 2 reference rows"));
                }
            }
        }
        Ok(())
    }
}

impl FromStr for ExperimentPlan {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key = value, got '{line}'"),
            })?;
            let key = k.trim().to_string();
            if entries.iter().any(|(_, seen, _)| *seen == key) {
                return Err(Error::Parse { line: i + 1, message: format!("duplicate key '{key}'") });
            }
            entries.push((i + 1, key, v.trim().to_string()));
        }

        let mut used = vec![false; entries.len()];
        let mut get = |key: &str| -> Option<(usize, String)> {
            let pos = entries.iter().position(|(_, k, _)| k == key)?;
            used[pos] = true;
            Some((entries[pos].0, entries[pos].2.clone()))
        };
        let at = |line: usize| move |e: Error| Error::Parse { line, message: e.to_string() };
        macro_rules! required {
            ($key:expr) => {
                get($key).ok_or_else(|| Error::invalid(format!("plan is missing '{}'", $key)))?
            };
        }
        macro_rules! number {
            ($key:expr, $default:expr, $ty:ty) => {
                match get($key) {
                    Some((line, v)) => v.parse::<$ty>().map_err(|_| Error::Parse {
                        line,
                        message: format!("bad value '{v}' for {}", $key),
                    })?,
                    None => $default,
                }
            };
        }

        let scenario = required!("scenario").1;
        let alphabet = match get("alphabet") {
            Some((line, v)) => Alphabet::from_str_symbols(&v).map_err(at(line))?,
            None => Alphabet::default(),
        };
        let users = number!("users", 1000, usize);
        let length = number!("length", 10, usize);
        let trials = number!("trials", 1000, usize);
        let seed = number!("seed", 0, u64);

        let (line, loci) = required!("loci");
        let loci = LocusSet::parse(&loci).map_err(at(line))?;
        let (line, values) = required!("values");
        let values = alphabet.parse_values(&values).map_err(at(line))?;
        let query = Query::new(loci, values).map_err(at(line))?;
        let sensitive = match get("sensitive") {
            Some((line, v)) if !v.is_empty() && v != "-" => LocusSet::parse(&v).map_err(at(line))?,
            _ => LocusSet::empty(),
        };
        let overlaps = match get("overlap") {
            Some((line, v)) => parse_usize_list(&v).map_err(at(line))?,
            None => Vec::new(),
        };
        let mechanisms = match get("mechanisms") {
            Some((line, v)) => {
                let mut ms = v
                    .split(',')
                    .map(|m| m.trim().parse())
                    .collect::<Result<Vec<MechanismId>>>()
                    .map_err(at(line))?;
                ms.sort();
                ms.dedup();
                ms
            }
            None => MechanismId::ALL.to_vec(),
        };

        let (_, kind) = required!("model");
        let model = match kind.as_str() {
            "markov" => {
                let initial = match get("initial") {
                    None => MarkovChainModel::uniform_initial(alphabet.size()),
                    Some((_, v)) if v == "uniform" => MarkovChainModel::uniform_initial(alphabet.size()),
                    Some((line, v)) => parse_grid(&v).map_err(at(line))?,
                };
                let (param, (line, grid)) = match (get("phi"), get("b")) {
                    (Some(g), None) => (MarkovParam::Phi, g),
                    (None, Some(g)) => (MarkovParam::B, g),
                    (None, None) => (MarkovParam::Phi, (0, "0.25:1.0:0.05".to_string())),
                    (Some((line, _)), Some(_)) => {
                        return Err(Error::Parse { line, message: "give either phi or b, not both".into() })
                    }
                };
                ModelSpec::Markov { initial, param, grid: parse_grid(&grid).map_err(at(line))? }
            }
            "hmm" => {
                let pis = match get("pi") {
                    Some((line, v)) => parse_grid(&v).map_err(at(line))?,
                    None => parse_grid("0:0.5:0.1")?,
                };
                let thetas = match get("theta") {
                    Some((line, v)) => parse_grid(&v).map_err(at(line))?,
                    None => vec![0.01, 0.05],
                };
                let reference_rows = number!("reference_rows", 100, usize);
                let smoothing = number!("smoothing", false, bool);
                ModelSpec::Hmm { reference_rows, pis, thetas, smoothing }
            }
            other => return Err(Error::invalid(format!("unknown model '{other}' (markov|hmm)"))),
        };

        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Parse {
                line: entries[i].0,
                message: format!("unknown key '{}'", entries[i].1),
            });
        }
        let plan = ExperimentPlan {
            scenario,
            alphabet,
            model,
            users,
            length,
            query,
            sensitive,
            overlaps,
            trials,
            seed,
            mechanisms,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = "
        scenario = fig3a   # uniform start
        model = markov
        phi = 0.25:1.0:0.05
        users = 100
        loci = 5,6
        values = A,T
        sensitive = 3,4
        trials = 20
        seed = 7
    ";

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0.25:0.4:0.05").unwrap(), vec![0.25, 0.3, 0.35, 0.4]);
        assert_eq!(parse_grid("0.01,0.05").unwrap(), vec![0.01, 0.05]);
        assert_eq!(parse_grid("0:0.5:0.1").unwrap().len(), 6);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn parses_markov_plan() {
        let plan: ExperimentPlan = FIG3.parse().unwrap();
        assert_eq!(plan.users, 100);
        assert_eq!(plan.mechanisms.len(), 7);
        let points = plan.points();
        assert_eq!(points.len(), 16);
        assert_eq!(points[3].label, "phi=0.4");
        assert_eq!(points[15].model, PointModel::Markov { phi: 1.0 });
    }

    #[test]
    fn b_grid_and_overlaps() {
        let plan: ExperimentPlan = "
            scenario = s
            model = markov
            b = 0,0.25
            length = 10
            loci = 3-10
            values = ATATATAT
            sensitive = 1,2
            overlap = 0:8:4
            mechanisms = m1,central
        "
        .parse()
        .unwrap();
        let points = plan.points();
        assert_eq!(points.len(), 6);
        assert_eq!(points[0].model, PointModel::Markov { phi: 1.0 });
        assert_eq!(points[3].model, PointModel::Markov { phi: 0.25 });
        assert_eq!(points[1].label, "b=0;overlap=4");
        assert_eq!(points[1].sensitive.indices(), &[1, 2, 3, 4, 5, 6]);
        assert_eq!(plan.mechanisms, vec![MechanismId::M1, MechanismId::Central]);
    }

    #[test]
    fn hmm_defaults() {
        let plan: ExperimentPlan =
            "scenario = h\nmodel = hmm\nlength = 20\nloci = 9,10\nvalues = A,T\nsensitive = 8\n"
                .parse()
                .unwrap();
        let points = plan.points();
        assert_eq!(points.len(), 12);
        assert_eq!(points[0].label, "pi=0;theta=0.01");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = FIG3.replace("users = 100", "users = many");
        match bad.parse::<ExperimentPlan>() {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(FIG3.replace("seed = 7", "sead = 7").parse::<ExperimentPlan>().is_err());
        assert!(FIG3.replace("trials = 20", "trials = 0").parse::<ExperimentPlan>().is_err());
        assert!(FIG3.replace("loci = 5,6", "loci = 5,16").parse::<ExperimentPlan>().is_err());
        assert!(FIG3.replace("phi = 0.25:1.0:0.05", "phi = 1.5").parse::<ExperimentPlan>().is_err());
    }
}
