use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::RngCore;
use rayon::prelude::*;

use super::baseline::{mask_and_sample_baseline, MaskMode};
use super::frontier::{dp_frontier_match, FrontierMetric};
use super::plan::{ExperimentPlan, MechanismId, ModelSpec, PlanPoint, PointModel};
use crate::audit::{audit_local, AuditReport};
use crate::central::{build_central_channel, CentralMechanism};
use crate::dp;
use crate::local::{
    local_aggregate_eae_exact, local_aggregate_mse, local_error_law, release, report_from,
    ErrorReport, ErrorSplit, LocalAnalysis, LocalMechanism, MechanismKind,
};
use crate::model::{
    hmm_generate, HmmGeneratorConfig, MarkovChainModel, Query, Sequence, SequenceModel,
    TabularModel,
};
use crate::rng::substream;
use crate::{audit, Error, Result};

const REFERENCE_STREAM: u64 = 1;
const DATASET_STREAM: u64 = 2;
const TRIAL_STREAM: u64 = 3;
const USERS_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PerUserPe,
    Eae,
    Mse,
    LowerBound,
    EpsilonMatched,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::PerUserPe => "per_user_Pe",
            Metric::Eae => "EAE",
            Metric::Mse => "MSE",
            Metric::LowerBound => "lower_bound",
            Metric::EpsilonMatched => "epsilon_matched",
        }
    }
}

/// Where a value comes from. `Conditional` is the exact expectation given a
/// fixed dataset (HMM path), which is what the Monte Carlo estimates there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Empirical,
    ClosedForm,
    Conditional,
    Matched,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Empirical => "empirical",
            Source::ClosedForm => "closed_form",
            Source::Conditional => "conditional",
            Source::Matched => "matched",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario: String,
    pub point: String,
    pub mechanism: String,
    pub metric: Metric,
    pub source: Source,
    pub value: f64,
    pub std_error: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub scenario: String,
    pub point: String,
    pub mechanism: String,
    pub method: String,
    /// `None` when the audit was skipped for capacity.
    pub max_deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOutput {
    pub results: Vec<ResultRow>,
    pub audits: Vec<AuditRow>,
}

pub const RESULTS_HEADER: &str = "scenario,point,mechanism,metric,source,value,std_error,trials";
pub const AUDIT_HEADER: &str = "scenario,point,mechanism,method,max_deviation,tolerance,passed";

fn opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

impl PlanOutput {
    pub fn results_csv(&self) -> String {
        let mut out = format!("{RESULTS_HEADER}\n");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:?},{:?},{}",
                r.scenario,
                r.point,
                r.mechanism,
                r.metric.name(),
                r.source.name(),
                r.value,
                r.std_error,
                r.trials
            );
        }
        out
    }

    pub fn audit_csv(&self) -> String {
        let mut out = format!("{AUDIT_HEADER}\n");
        for a in &self.audits {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.scenario,
                a.point,
                a.mechanism,
                a.method,
                opt(a.max_deviation),
                opt(a.tolerance),
                opt(a.passed)
            );
        }
        out
    }

    /// Writes `results.csv` and `audit.csv` into `dir`. Existing files are
    /// only replaced when `force` is set.
    pub fn write_to(&self, dir: &Path, force: bool) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let results = dir.join("results.csv");
        let audits = dir.join("audit.csv");
        for p in [&results, &audits] {
            if p.exists() && !force {
                return Err(Error::invalid(format!(
                    "{} exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
        std::fs::write(&results, self.results_csv())?;
        std::fs::write(&audits, self.audit_csv())?;
        Ok((results, audits))
    }

    /// First row matching the given keys.
    pub fn find(&self, point: &str, mechanism: &str, metric: Metric, source: Source) -> Option<&ResultRow> {
        self.results.iter().find(|r| {
            r.point == point && r.mechanism == mechanism && r.metric == metric && r.source == source
        })
    }
}

/// Everything a grid point needs before trials start.
struct Setup {
    model: Box<dyn SequenceModel>,
    /// Fixed users on the HMM path; fresh users per trial otherwise.
    dataset: Option<Vec<Sequence>>,
    analysis: LocalAnalysis,
    report: ErrorReport,
    m1: LocalMechanism,
    m2: LocalMechanism,
    central: Option<CentralMechanism>,
    eps_rr: Option<f64>,
    eps_laplace: Option<f64>,
    eps_ldp: Option<f64>,
}

/// The point's prior, plus the fixed dataset on the HMM path.
type PointPrior = (Box<dyn SequenceModel>, Option<Vec<Sequence>>);

fn point_model(plan: &ExperimentPlan, point: &PlanPoint) -> Result<PointPrior> {
    let c = plan.alphabet.size();
    match (&plan.model, point.model) {
        (ModelSpec::Markov { initial, .. }, PointModel::Markov { phi }) => Ok((
            Box::new(MarkovChainModel::symmetric(plan.length, initial.clone(), phi)?),
            None,
        )),
        (ModelSpec::Hmm { reference_rows, smoothing, .. }, PointModel::Hmm { pi, theta }) => {
            let dataset = hmm_dataset(plan, *reference_rows, pi, theta)?;
            let support = plan.query.loci().union(&point.sensitive);
            let model = TabularModel::from_dataset(&dataset, &support, c, *smoothing)?;
            Ok((Box::new(model), Some(dataset)))
        }
        _ => unreachable!("points come from the plan's own model spec"),
    }
}

/// Uniform reference rows, then the copy-with-switching dataset. Depends
/// only on the seed and (π, θ), so overlap points share a dataset.
pub(crate) fn hmm_dataset(plan: &ExperimentPlan, rows: usize, pi: f64, theta: f64) -> Result<Vec<Sequence>> {
    let c = plan.alphabet.size();
    let uniform = MarkovChainModel::iid_uniform(plan.length, c)?;
    let mut rng = substream(plan.seed, &[REFERENCE_STREAM]);
    let reference = (0..rows).map(|_| uniform.sample_sequence(&mut rng)).collect();
    let seed = substream(plan.seed, &[DATASET_STREAM, pi.to_bits(), theta.to_bits()]).next_u64();
    hmm_generate(
        &HmmGeneratorConfig {
            reference,
            alphabet_size: c,
            switch_keep_prob: pi,
            substitution_prob: theta,
            seed,
        },
        plan.users,
    )
}

fn setup(plan: &ExperimentPlan, point: &PlanPoint) -> Result<Setup> {
    let (model, dataset) = point_model(plan, point)?;
    let analysis = LocalAnalysis::new(model.as_ref(), &plan.query, &point.sensitive)?;
    let report = report_from(&analysis)?;
    let m1 = LocalMechanism::from_analysis(MechanismKind::M1, &analysis)?;
    let m2 = LocalMechanism::from_analysis(MechanismKind::M2, &analysis)?;
    let users = plan.users;
    let central = if plan.runs(MechanismId::Central) || plan.runs(MechanismId::Laplace) {
        Some(CentralMechanism::from_analysis(&analysis, users)?)
    } else {
        None
    };
    let best = if report.best_kind == MechanismKind::M1 { &m1 } else { &m2 };
    let best_mse = local_aggregate_mse(best.error_split(&analysis), users);
    let mut targets = vec![(FrontierMetric::PerUserPe, report.best), (FrontierMetric::Mse, best_mse)];
    if let Some(c) = &central {
        targets.push((FrontierMetric::Eae, c.expected_error()));
    }
    let matched = dp_frontier_match(&targets, users);
    let eps = |i: usize| matched.get(i).and_then(|r| r.as_ref().ok().copied());
    Ok(Setup {
        model,
        dataset,
        eps_rr: eps(0).filter(|_| plan.runs(MechanismId::Rr)),
        eps_ldp: eps(1).filter(|_| plan.runs(MechanismId::Rr)),
        eps_laplace: eps(2).filter(|_| plan.runs(MechanismId::Laplace)),
        analysis,
        report,
        m1,
        m2,
        central,
    })
}

/// (per-user error rate, |Σ(Y - A)|, (Σ(Y - A))^2) for each mechanism.
type Outcome = [Option<[f64; 3]>; MechanismId::ALL.len()];

fn run_trial(plan: &ExperimentPlan, setup: &Setup, point_index: usize, trial: usize) -> Result<Outcome> {
    let labels = |stream: u64| [TRIAL_STREAM, point_index as u64, trial as u64, stream];
    let sampled;
    let users: &[Sequence] = match &setup.dataset {
        Some(d) => d,
        None => {
            let mut rng = substream(plan.seed, &labels(USERS_STREAM));
            sampled = (0..plan.users)
                .map(|_| setup.model.sample_sequence(&mut rng))
                .collect::<Vec<_>>();
            &sampled
        }
    };
    let k = users.len() as f64;
    let truth: Vec<bool> = users.iter().map(|u| plan.query.true_answer(u)).collect();
    let a = truth.iter().filter(|&&t| t).count();
    let bits = |ys: &[bool]| {
        let wrong = ys.iter().zip(&truth).filter(|(y, t)| y != t).count() as f64;
        let d = ys.iter().filter(|&&y| y).count() as f64 - a as f64;
        [wrong / k, d.abs(), d * d]
    };
    let count = |y: f64| {
        let d = y - a as f64;
        [f64::NAN, d.abs(), d * d]
    };

    let mut out: Outcome = Default::default();
    for m in MechanismId::ALL {
        if !plan.runs(m) {
            continue;
        }
        let mut rng = substream(plan.seed, &labels(m.stream()));
        out[m as usize] = match m {
            MechanismId::M1 | MechanismId::M2 => {
                let mech = if m == MechanismId::M1 { &setup.m1 } else { &setup.m2 };
                let ys: Vec<bool> = users.iter().map(|u| release(mech, u, &mut rng)).collect();
                Some(bits(&ys))
            }
            MechanismId::Central => {
                let c = setup.central.as_ref().expect("built when central runs");
                let probs = c.user_match_probs(users)?;
                Some(count(c.release(a, &probs, &mut rng) as f64))
            }
            MechanismId::Rr => setup.eps_rr.map(|eps| {
                let ys: Vec<bool> = truth
                    .iter()
                    .map(|&t| dp::randomized_response(t, eps, &mut rng).expect("eps >= 0"))
                    .collect();
                let mut o = bits(&ys);
                // MSE of the unbiased count estimate, not of the raw sum.
                if eps > 0.0 {
                    let ones = ys.iter().filter(|&&y| y).count();
                    let est = dp::rr_unbiased_count(ones, users.len(), eps).expect("eps > 0");
                    o[2] = (est - a as f64).powi(2);
                } else {
                    o[2] = f64::NAN;
                }
                o
            }),
            MechanismId::Laplace => setup
                .eps_laplace
                .map(|eps| count(dp::laplace_count_release(a as f64, eps, &mut rng).expect("eps > 0"))),
            MechanismId::MaskUniform | MechanismId::MaskPrior => {
                let mode = if m == MechanismId::MaskUniform { MaskMode::Uniform } else { MaskMode::Prior };
                let ys = mask_and_sample_baseline(
                    users,
                    plan.alphabet.size(),
                    &plan.query,
                    &setup.analysis.sensitive,
                    mode,
                    &mut rng,
                )?;
                Some(bits(&ys))
            }
        };
    }
    Ok(out)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-user splits of a local mechanism on fixed users.
fn conditional_splits(mech: &LocalMechanism, users: &[Sequence], query: &Query) -> Vec<ErrorSplit> {
    users
        .iter()
        .map(|u| {
            let mu = mech.release_prob_for(u);
            if query.true_answer(u) {
                ErrorSplit { missed: 1.0 - mu, false_alarm: 0.0 }
            } else {
                ErrorSplit { missed: 0.0, false_alarm: mu }
            }
        })
        .collect()
}

fn law_moments(law: &[f64]) -> (f64, f64) {
    let offset = (law.len() / 2) as f64;
    law.iter().enumerate().fold((0.0, 0.0), |(e, s), (d, p)| {
        let x = d as f64 - offset;
        (e + p * x.abs(), s + p * x * x)
    })
}

fn run_point(plan: &ExperimentPlan, point_index: usize, point: &PlanPoint) -> Result<PlanOutput> {
    let setup = setup(plan, point)?;
    let outcomes = (0..plan.trials)
        .into_par_iter()
        .map(|t| run_trial(plan, &setup, point_index, t))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut push = |mechanism: &str, metric: Metric, source: Source, value: f64, se: f64, trials: usize| {
        if value.is_finite() {
            rows.push(ResultRow {
                scenario: plan.scenario.clone(),
                point: point.label.clone(),
                mechanism: mechanism.to_string(),
                metric,
                source,
                value,
                std_error: se,
                trials,
            });
        }
    };

    let k = plan.users;
    let a = &setup.analysis;
    let metrics = [Metric::PerUserPe, Metric::Eae, Metric::Mse];
    for m in MechanismId::ALL.into_iter().filter(|&m| plan.runs(m)) {
        if outcomes.iter().all(|o| o[m as usize].is_none()) {
            continue;
        }
        for (i, metric) in metrics.into_iter().enumerate() {
            let values: Vec<f64> = outcomes.iter().filter_map(|o| o[m as usize]).map(|v| v[i]).collect();
            if values.iter().all(|v| v.is_finite()) {
                let (mean, se) = mean_and_se(&values);
                push(m.name(), metric, Source::Empirical, mean, se, values.len());
            }
        }

        match m {
            MechanismId::M1 | MechanismId::M2 => {
                let (mech, pe) = if m == MechanismId::M1 {
                    (&setup.m1, setup.report.p_e1)
                } else {
                    (&setup.m2, setup.report.p_e2)
                };
                let split = mech.error_split(a);
                push(m.name(), Metric::PerUserPe, Source::ClosedForm, pe, 0.0, 0);
                push(m.name(), Metric::Eae, Source::ClosedForm, local_aggregate_eae_exact(split, k), 0.0, 0);
                push(m.name(), Metric::Mse, Source::ClosedForm, local_aggregate_mse(split, k), 0.0, 0);
                if let Some(users) = &setup.dataset {
                    let splits = conditional_splits(mech, users, &plan.query);
                    let pe = splits.iter().map(ErrorSplit::total).sum::<f64>() / users.len() as f64;
                    let (eae, mse) = law_moments(&local_error_law(&splits));
                    push(m.name(), Metric::PerUserPe, Source::Conditional, pe, 0.0, 0);
                    push(m.name(), Metric::Eae, Source::Conditional, eae, 0.0, 0);
                    push(m.name(), Metric::Mse, Source::Conditional, mse, 0.0, 0);
                }
            }
            MechanismId::Central => {
                let c = setup.central.as_ref().expect("built when central runs");
                push(m.name(), Metric::Eae, Source::ClosedForm, c.expected_error(), 0.0, 0);
                push(m.name(), Metric::Mse, Source::ClosedForm, c.expected_squared_error(), 0.0, 0);
                if let Some(users) = &setup.dataset {
                    let count = users.iter().filter(|u| plan.query.true_answer(u)).count();
                    let r = c.ratio(count, &c.user_match_probs(users)?);
                    push(m.name(), Metric::Eae, Source::Conditional, c.expected_error_given(count, r), 0.0, 0);
                    push(m.name(), Metric::Mse, Source::Conditional, c.expected_squared_error_given(count, r), 0.0, 0);
                }
            }
            MechanismId::Rr => {
                if let Some(eps) = setup.eps_rr {
                    let f = dp::rr_error_prob(eps)?;
                    let p = a.p_match;
                    let split = ErrorSplit { missed: p * f, false_alarm: (1.0 - p) * f };
                    push(m.name(), Metric::EpsilonMatched, Source::Matched, eps, 0.0, 0);
                    push(m.name(), Metric::PerUserPe, Source::ClosedForm, f, 0.0, 0);
                    push(m.name(), Metric::Eae, Source::ClosedForm, local_aggregate_eae_exact(split, k), 0.0, 0);
                    if eps > 0.0 {
                        push(m.name(), Metric::Mse, Source::ClosedForm, dp::rr_unbiased_count_mse(k, eps)?, 0.0, 0);
                    }
                    if let Some(users) = &setup.dataset {
                        let splits: Vec<ErrorSplit> = users
                            .iter()
                            .map(|u| {
                                if plan.query.true_answer(u) {
                                    ErrorSplit { missed: f, false_alarm: 0.0 }
                                } else {
                                    ErrorSplit { missed: 0.0, false_alarm: f }
                                }
                            })
                            .collect();
                        let (eae, _) = law_moments(&local_error_law(&splits));
                        push(m.name(), Metric::Eae, Source::Conditional, eae, 0.0, 0);
                    }
                }
                if let Some(eps) = setup.eps_ldp {
                    push("ldp_count", Metric::EpsilonMatched, Source::Matched, eps, 0.0, 0);
                    push("ldp_count", Metric::Mse, Source::ClosedForm, dp::ldp_count_mse(k, eps)?, 0.0, 0);
                }
            }
            MechanismId::Laplace => {
                if let Some(eps) = setup.eps_laplace {
                    push(m.name(), Metric::EpsilonMatched, Source::Matched, eps, 0.0, 0);
                    push(m.name(), Metric::Eae, Source::ClosedForm, dp::laplace_expected_error(eps)?, 0.0, 0);
                    push(m.name(), Metric::Mse, Source::ClosedForm, 2.0 / (eps * eps), 0.0, 0);
                }
            }
            MechanismId::MaskUniform | MechanismId::MaskPrior => {}
        }
    }
    push("bound", Metric::LowerBound, Source::ClosedForm, setup.report.lower_bound, 0.0, 0);

    let audits = point_audits(plan, point, &setup)?;
    Ok(PlanOutput { results: rows, audits })
}

fn audit_row(plan: &ExperimentPlan, point: &PlanPoint, mechanism: &str, report: Result<AuditReport>) -> Result<AuditRow> {
    let base = |method: String, r: Option<&AuditReport>| AuditRow {
        scenario: plan.scenario.clone(),
        point: point.label.clone(),
        mechanism: mechanism.to_string(),
        method,
        max_deviation: r.map(|r| r.max_deviation),
        tolerance: r.map(|r| r.tolerance),
        passed: r.map(|r| r.passed),
    };
    match report {
        Ok(r) => Ok(base(r.method.to_string(), Some(&r))),
        Err(e) if e.is_capacity() => Ok(base("skipped_capacity".to_string(), None)),
        Err(e) => Err(e),
    }
}

fn point_audits(plan: &ExperimentPlan, point: &PlanPoint, setup: &Setup) -> Result<Vec<AuditRow>> {
    let model = setup.model.as_ref();
    let mut rows = Vec::new();
    for (m, mech) in [(MechanismId::M1, &setup.m1), (MechanismId::M2, &setup.m2)] {
        if plan.runs(m) {
            rows.push(audit_row(plan, point, m.name(), audit_local(mech, model))?);
        }
    }
    if plan.runs(MechanismId::Central) {
        let report = build_central_channel(model, &plan.query, &point.sensitive, plan.users).and_then(|ch| {
            audit::audit_central(&ch, model, &plan.query, &point.sensitive, plan.users)
        });
        rows.push(audit_row(plan, point, MechanismId::Central.name(), report)?);
    }
    if let Some(eps) = setup.eps_rr {
        // Randomized response written as a release table over (x_L̄, x_S).
        let a = &setup.analysis;
        let f = dp::rr_error_prob(eps)?;
        let table = (0..a.lbar_count())
            .flat_map(|l| (0..a.s_count()).map(move |s| if a.answer(l, s) { 1.0 - f } else { f }))
            .collect();
        let rr = LocalMechanism::from_table(plan.query.clone(), point.sensitive.clone(), a.alphabet_size, table)?;
        rows.push(audit_row(plan, point, MechanismId::Rr.name(), audit_local(&rr, model))?);
    }
    Ok(rows)
}

/// Runs every grid point. Points run in parallel; rows come out in plan
/// order, so a fixed seed gives byte-identical CSV.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutput> {
    let points = plan.points();
    let parts = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| run_point(plan, i, p))
        .collect::<Result<Vec<_>>>()?;
    let mut out = PlanOutput::default();
    for p in parts {
        out.results.extend(p.results);
        out.audits.extend(p.audits);
    }
    Ok(out)
}

/// `run_plan` with the plan's overlap schedule replaced: point `o` makes the
/// first `o` queried loci sensitive on top of the plan's base set.
pub fn overlap_sweep(plan: &ExperimentPlan, overlaps: &[usize]) -> Result<PlanOutput> {
    if let Some(&o) = overlaps.iter().find(|&&o| o > plan.query.loci().len()) {
        return Err(Error::invalid(format!("overlap {o} exceeds the queried loci")));
    }
    let mut plan = plan.clone();
    plan.overlaps = overlaps.to_vec();
    run_plan(&plan)
}
