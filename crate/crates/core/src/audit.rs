//! Certification that a mechanism's output is independent of the sensitive
//! loci: max over (y, x_S) of |P(Y = y | x_S) - P(Y = y)|.
//!
//! The reference law is Σ_{x_S} P(x_S) P(Y = y | x_S), so the audit measures
//! exactly the independence identity and nothing else. Conditional laws are
//! recomputed from the model here rather than taken from the mechanism.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::central::CentralChannel;
use crate::local::LocalMechanism;
use crate::model::{LocusSet, Query, Sequence, SequenceModel, TupleIndex};
use crate::rng::{substream, ChaCha8Rng};
use crate::{Error, Result};

pub const EXACT_TOLERANCE: f64 = 1e-10;
pub const MIN_EMPIRICAL_TRIALS: usize = 10_000;
pub const MIN_STRATUM_SAMPLES: u64 = 30;
/// Empirical pass threshold in units of the largest cell standard error.
pub const SIGMA_MULTIPLIER: f64 = 4.0;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMethod {
    ExactEnumeration,
    Empirical,
}

impl std::fmt::Display for AuditMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AuditMethod::ExactEnumeration => "exact_enumeration",
            AuditMethod::Empirical => "empirical",
        })
    }
}

/// Output value and the sensitive values (one row per user) where the
/// deviation peaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCell {
    pub output: usize,
    pub sensitive: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub method: AuditMethod,
    pub max_deviation: f64,
    pub worst_cell: Option<WorstCell>,
    pub tolerance: f64,
    pub passed: bool,
    /// Empirical audits only: largest binomial standard error over cells.
    pub max_std_error: Option<f64>,
    /// Empirical audits only: strata skipped for having too few samples.
    pub excluded: Vec<Vec<u8>>,
}

impl AuditReport {
    pub const CSV_HEADER: &'static str = "method,max_deviation,tolerance,passed";

    fn exact(deviation: Option<(f64, WorstCell)>) -> Self {
        let (max_deviation, worst_cell) = match deviation {
            Some((d, c)) => (d, Some(c)),
            None => (0.0, None),
        };
        AuditReport {
            method: AuditMethod::ExactEnumeration,
            max_deviation,
            worst_cell,
            tolerance: EXACT_TOLERANCE,
            passed: max_deviation <= EXACT_TOLERANCE,
            max_std_error: None,
            excluded: Vec::new(),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{}",
            self.method, self.max_deviation, self.tolerance, self.passed
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn with_empirical_hint(e: Error) -> Error {
    match e {
        Error::Capacity { what, needed, limit, .. } => Error::Capacity {
            what,
            needed,
            limit,
            hint: "run the empirical audit instead",
        },
        other => other,
    }
}

/// Joint P(x_part, x_S) over `part ∪ S` from the model, laid out as
/// `part_code * s_count + s_code`.
fn joint_over<M: SequenceModel + ?Sized>(
    model: &M,
    part: &LocusSet,
    sensitive: &LocusSet,
) -> Result<(Vec<f64>, TupleIndex, TupleIndex)> {
    let c = model.alphabet_size();
    let union = part.union(sensitive);
    let (part_index, s_index) = (TupleIndex::new(c, part.len()), TupleIndex::new(c, sensitive.len()));
    let mut joint = vec![0.0; part_index.count() * s_index.count()];
    if union.is_empty() {
        joint[0] = 1.0;
        return Ok((joint, part_index, s_index));
    }
    let table = model.joint_table(&union).map_err(with_empirical_hint)?;
    let (pp, sp) = (part.positions_in(&union), sensitive.positions_in(&union));
    for (i, &p) in table.probs().iter().enumerate() {
        let v = table.index().decode(i);
        joint[part_index.encode_at(&v, &pp) * s_index.count() + s_index.encode_at(&v, &sp)] += p;
    }
    Ok((joint, part_index, s_index))
}

/// Largest |cond[s][y] - reference[y]| over positive-probability strata.
fn max_deviation(
    conditionals: &[(f64, Vec<f64>)],
    cell: impl Fn(usize) -> Vec<Vec<u8>>,
) -> Option<(f64, WorstCell)> {
    let outputs = conditionals.iter().map(|(_, c)| c.len()).max()?;
    let mut reference = vec![0.0; outputs];
    for (p, cond) in conditionals {
        for (r, c) in reference.iter_mut().zip(cond) {
            *r += p * c;
        }
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (s, (p, cond)) in conditionals.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        for (y, (c, r)) in cond.iter().zip(&reference).enumerate() {
            let d = (c - r).abs();
            if best.is_none_or(|(b, _, _)| d > b) {
                best = Some((d, y, s));
            }
        }
    }
    best.map(|(d, y, s)| (d, WorstCell { output: y, sensitive: cell(s) }))
}

/// Exact audit of a local mechanism against `model`.
pub fn audit_local<M: SequenceModel + ?Sized>(mech: &LocalMechanism, model: &M) -> Result<AuditReport> {
    let n = model.length();
    mech.query().loci().check_within(n)?;
    mech.sensitive().check_within(n)?;
    if model.alphabet_size() != mech.s_index().radix() {
        return Err(Error::DimensionMismatch {
            expected: mech.s_index().radix(),
            got: model.alphabet_size(),
        });
    }
    let (joint, lbar_index, s_index) = joint_over(model, mech.lbar(), mech.sensitive())?;
    let s_count = s_index.count();
    let conditionals: Vec<(f64, Vec<f64>)> = (0..s_count)
        .into_par_iter()
        .map(|s| {
            let ps: f64 = (0..lbar_index.count()).map(|l| joint[l * s_count + s]).sum();
            if ps <= 0.0 {
                return (0.0, vec![0.0, 0.0]);
            }
            let one: f64 = (0..lbar_index.count())
                .map(|l| mech.release_prob(l, s) * joint[l * s_count + s] / ps)
                .sum();
            (ps, vec![1.0 - one, one])
        })
        .collect();
    Ok(AuditReport::exact(max_deviation(&conditionals, |s| {
        vec![s_index.decode(s)]
    })))
}

fn convolve_bernoulli(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &q in probs {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &p) in pmf.iter().enumerate() {
            next[k] += p * (1.0 - q);
            next[k + 1] += p * q;
        }
        pmf = next;
    }
    pmf
}

/// Exact audit of a central channel: P(Y = y | matrix) =
/// Σ_a P(Y = y | a, matrix) P(A = a | matrix), compared across matrices.
pub fn audit_central<M: SequenceModel + ?Sized>(
    channel: &CentralChannel,
    model: &M,
    query: &Query,
    sensitive: &LocusSet,
    users: usize,
) -> Result<AuditReport> {
    if users != channel.users() {
        return Err(Error::DimensionMismatch { expected: channel.users(), got: users });
    }
    let n = model.length();
    query.loci().check_within(n)?;
    sensitive.check_within(n)?;
    let (joint, q_index, s_index) = joint_over(model, query.loci(), sensitive)?;
    if s_index != channel.s_index() {
        return Err(Error::invalid("channel was built for a different sensitive set"));
    }
    let s_count = s_index.count();
    let v = q_index.encode(query.reference());
    let p_s: Vec<f64> = (0..s_count)
        .map(|s| (0..q_index.count()).map(|l| joint[l * s_count + s]).sum())
        .collect();
    let q: Vec<f64> = (0..s_count)
        .map(|s| if p_s[s] > 0.0 { joint[v * s_count + s] / p_s[s] } else { 0.0 })
        .collect();

    let conditionals: Vec<(f64, Vec<f64>)> = (0..channel.matrix_count())
        .into_par_iter()
        .map(|m| {
            let codes = channel.matrix(m);
            let pm: f64 = codes.iter().map(|&s| p_s[s]).product();
            let cond = convolve_bernoulli(&codes.iter().map(|&s| q[s]).collect::<Vec<_>>());
            let law = (0..=users)
                .map(|y| (0..=users).map(|a| channel.prob(y, a, m) * cond[a]).sum())
                .collect();
            (pm, law)
        })
        .collect();
    let total: f64 = conditionals.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "channel matrices cover probability {total}, not the full sensitive support"
        )));
    }
    Ok(AuditReport::exact(max_deviation(&conditionals, |m| {
        channel.matrix(m).iter().map(|&s| s_index.decode(s)).collect()
    })))
}

/// Monte Carlo audit. Each trial samples a sequence from `model`, releases
/// an output in `0..outputs`, and is stratified by its sensitive values.
/// Passes when the max deviation is within 4 standard errors.
pub fn audit_empirical<M, F>(
    model: &M,
    sensitive: &LocusSet,
    outputs: usize,
    trials: usize,
    seed: u64,
    release: F,
) -> Result<AuditReport>
where
    M: SequenceModel + ?Sized,
    F: Fn(&Sequence, &mut ChaCha8Rng) -> usize + Sync,
{
    if trials < MIN_EMPIRICAL_TRIALS {
        return Err(Error::invalid(format!(
            "empirical audit needs at least {MIN_EMPIRICAL_TRIALS} trials, got {trials}"
        )));
    }
    if outputs == 0 {
        return Err(Error::invalid("release must have at least one output"));
    }
    sensitive.check_within(model.length())?;
    let s_index = TupleIndex::new(model.alphabet_size(), sensitive.len());
    let s_count = s_index.count();
    let chunks = trials.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = substream(seed, &[chunk as u64]);
            let mut counts = vec![0u64; s_count * outputs];
            let size = CHUNK.min(trials - chunk * CHUNK);
            for _ in 0..size {
                let seq = model.sample_sequence(&mut rng as &mut dyn RngCore);
                let s = s_index.encode(&sensitive.extract(&seq));
                let y = release(&seq, &mut rng);
                if y >= outputs {
                    return Err(Error::invalid(format!("release produced {y}, expected < {outputs}")));
                }
                counts[s * outputs + y] += 1;
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; s_count * outputs],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let stratum = |s: usize| &counts[s * outputs..(s + 1) * outputs];
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for s in 0..s_count {
        let n: u64 = stratum(s).iter().sum();
        if n == 0 {
            continue;
        }
        if n < MIN_STRATUM_SAMPLES {
            excluded.push(s_index.decode(s));
        } else {
            kept.push((s, n));
        }
    }
    let kept_total: u64 = kept.iter().map(|(_, n)| n).sum();
    let mut pooled = vec![0.0; outputs];
    for &(s, _) in &kept {
        for (p, &c) in pooled.iter_mut().zip(stratum(s)) {
            *p += c as f64 / kept_total as f64;
        }
    }

    let mut max_dev = 0.0;
    let mut max_se: f64 = 0.0;
    let mut worst = None;
    for &(s, n) in &kept {
        for (y, &c) in stratum(s).iter().enumerate() {
            let p = pooled[y];
            let se = (p * (1.0 - p) / n as f64).sqrt();
            max_se = max_se.max(se);
            let d = (c as f64 / n as f64 - p).abs();
            if worst.is_none() || d > max_dev {
                max_dev = d;
                worst = Some(WorstCell { output: y, sensitive: vec![s_index.decode(s)] });
            }
        }
    }
    let tolerance = SIGMA_MULTIPLIER * max_se;
    Ok(AuditReport {
        method: AuditMethod::Empirical,
        max_deviation: max_dev,
        worst_cell: worst,
        tolerance,
        passed: max_dev <= tolerance,
        max_std_error: Some(max_se),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::build_central_channel;
    use crate::dp::randomized_response;
    use crate::local::{build_mechanism, release, MechanismKind};
    use crate::model::MarkovChainModel;
    use rand::Rng;

    fn loci(v: &[usize]) -> LocusSet {
        LocusSet::new(v.to_vec()).unwrap()
    }

    fn dependent() -> MarkovChainModel {
        MarkovChainModel::symmetric(6, MarkovChainModel::uniform_initial(4), 0.7).unwrap()
    }

    #[test]
    fn built_in_local_mechanisms_pass() {
        let m = dependent();
        let q = Query::new(loci(&[3, 5]), vec![0, 1]).unwrap();
        for s in [loci(&[2]), loci(&[3, 4]), loci(&[1, 3, 5])] {
            for kind in [MechanismKind::M1, MechanismKind::M2] {
                let mech = build_mechanism(kind, &m, &q, &s).unwrap();
                let r = audit_local(&mech, &m).unwrap();
                assert!(r.passed, "{kind} {s}: {}", r.max_deviation);
            }
        }
    }

    #[test]
    fn corrupted_cell_is_found() {
        let m = dependent();
        let q = Query::new(loci(&[3, 4]), vec![0, 1]).unwrap();
        let s = loci(&[2]);
        let mut mech = build_mechanism(MechanismKind::M1, &m, &q, &s).unwrap();
        // M1 releases 0 off the reference tuple.
        let (l, sc) = (mech.lbar_index().encode(&[1, 1]), 2);
        assert_eq!(mech.release_prob(l, sc), 0.0);
        mech.set_release_prob(l, sc, 0.1).unwrap();
        let r = audit_local(&mech, &m).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst_cell.unwrap().sensitive, vec![vec![2]]);
    }

    #[test]
    fn empty_sensitive_set_passes() {
        let m = dependent();
        let q = Query::new(loci(&[3]), vec![0]).unwrap();
        let mech = build_mechanism(MechanismKind::M1, &m, &q, &LocusSet::empty()).unwrap();
        let r = audit_local(&mech, &m).unwrap();
        assert!(r.passed);
        assert!(r.max_deviation < 1e-15);
    }

    #[test]
    fn central_channel_passes_and_identity_fails() {
        let m = dependent();
        let q = Query::new(loci(&[3, 4]), vec![0, 1]).unwrap();
        let s = loci(&[3]);
        let mut ch = build_central_channel(&m, &q, &s, 3).unwrap();
        assert!(audit_central(&ch, &m, &q, &s, 3).unwrap().passed);
        ch.set_all_ratios(1.0).unwrap();
        assert!(!audit_central(&ch, &m, &q, &s, 3).unwrap().passed);
        ch.set_all_ratios(0.0).unwrap();
        let r = audit_central(&ch, &m, &q, &s, 3).unwrap();
        assert!(r.max_deviation < 1e-15);
    }

    #[test]
    fn empirical_agrees_with_exact() {
        let m = dependent();
        let q = Query::new(loci(&[3, 5]), vec![0, 1]).unwrap();
        let s = loci(&[2, 3]);
        let mech = build_mechanism(MechanismKind::M2, &m, &q, &s).unwrap();
        let r = audit_empirical(&m, &s, 2, 200_000, 5, |seq, rng| {
            release(&mech, seq, rng) as usize
        })
        .unwrap();
        assert!(r.passed, "{r:?}");

        let leaky = audit_empirical(&m, &s, 2, 200_000, 5, |seq, rng| {
            randomized_response(q.true_answer(seq), 1.0, rng).unwrap() as usize
        })
        .unwrap();
        assert!(!leaky.passed);
    }

    #[test]
    fn empirical_rejects_small_trials_and_lists_sparse_strata() {
        let m = dependent();
        let s = loci(&[1, 2, 3, 4, 5]);
        assert!(audit_empirical(&m, &s, 2, 100, 1, |_, _| 0).is_err());
        let r = audit_empirical(&m, &s, 2, 10_000, 1, |_, rng| rng.random_range(0..2)).unwrap();
        assert!(!r.excluded.is_empty());
    }

    #[test]
    fn report_serializes() {
        let m = dependent();
        let q = Query::new(loci(&[3]), vec![0]).unwrap();
        let mech = build_mechanism(MechanismKind::M1, &m, &q, &loci(&[2])).unwrap();
        let r = audit_local(&mech, &m).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["method"], "exact_enumeration");
        assert_eq!(json["passed"], true);
        assert!(r.csv_row().starts_with("exact_enumeration,"));
    }
}
