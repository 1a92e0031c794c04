use std::fs;
use std::path::Path;

use zeroleak::audit::{audit_central, audit_empirical, audit_local, AuditReport};
use zeroleak::central::{build_central_channel, CentralMechanism};
use zeroleak::dp::{epsilon_for_target_error, epsilon_for_target_mse, epsilon_for_target_pe};
use zeroleak::local::{build_mechanism, error_probabilities, lower_bound, release, ErrorReport, LocalMechanism, MechanismKind};
use zeroleak::model::{hmm_generate, read_dataset, render_dataset, Dataset, HmmGeneratorConfig};
use zeroleak::rng::{seeded, substream};
use zeroleak::sim::{run_plan, ExperimentPlan};
use zeroleak::{
    Alphabet, Error, LocusSet, MarkovChainModel, Query, Sequence, SequenceModel, TabularModel,
};

use crate::args::*;
use crate::Failure;

type CmdResult = Result<(), Failure>;

pub fn run(command: Command) -> CmdResult {
    match command {
        Command::Generate(a) => generate(a),
        Command::AnswerLocal(a) => answer_local(a),
        Command::AnswerCentral(a) => answer_central(a),
        Command::Error(a) => error(a),
        Command::LowerBound(a) => print_lower_bound(a),
        Command::Audit(a) => audit(a),
        Command::RunPlan(a) => plan(a),
        Command::DpMatch(a) => dp_match(a),
    }
}

/// The given seed, or a fresh one that is printed so the run can be repeated.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s} (pass --seed {s} to reproduce)");
        s
    })
}

fn check_writable(path: &Path, force: bool) -> Result<(), Error> {
    if path.exists() && !force {
        return Err(Error::Invalid(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn alphabet(text: &str) -> Result<Alphabet, Error> {
    Alphabet::from_str_symbols(text)
}

fn initial(text: &str, alphabet_size: usize) -> Result<Vec<f64>, Error> {
    if text == "uniform" {
        return Ok(MarkovChainModel::uniform_initial(alphabet_size));
    }
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("bad initial probability '{v}'")))
        })
        .collect()
}

fn markov(alphabet: &Alphabet, length: usize, phi: f64, init: &str) -> Result<MarkovChainModel, Error> {
    MarkovChainModel::symmetric(length, initial(init, alphabet.size())?, phi)
}

struct Spec {
    alphabet: Alphabet,
    query: Query,
    sensitive: LocusSet,
    model: Box<dyn SequenceModel>,
}

impl QueryModelArgs {
    fn resolve(&self) -> Result<Spec, Error> {
        let alphabet = alphabet(&self.model.alphabet)?;
        let loci = LocusSet::parse(&self.query.loci)?;
        if loci.is_empty() {
            return Err(Error::Invalid("--loci must name at least one locus".into()));
        }
        let query = Query::new(loci, alphabet.parse_values(&self.query.values)?)?;
        let sensitive = LocusSet::parse(&self.query.sensitive)?;
        let model: Box<dyn SequenceModel> = match (&self.model.data, self.model.phi) {
            (Some(path), _) => {
                let data = read_dataset(path, &alphabet)?;
                let support = query.loci().union(&sensitive);
                Box::new(TabularModel::from_dataset(
                    &data.sequences,
                    &support,
                    alphabet.size(),
                    self.model.smoothing,
                )?)
            }
            (None, Some(phi)) => Box::new(markov(&alphabet, self.model.length, phi, &self.model.initial)?),
            (None, None) => return Err(Error::Invalid("give either --phi or --data".into())),
        };
        query.loci().check_within(model.length())?;
        sensitive.check_within(model.length())?;
        Ok(Spec { alphabet, query, sensitive, model })
    }
}

fn read_users(path: &Path, spec: &Spec) -> Result<Dataset, Error> {
    let data = read_dataset(path, &spec.alphabet)?;
    if data.sequence_length() != spec.model.length() {
        return Err(Error::Invalid(format!(
            "input sequences have length {}, the model has {}",
            data.sequence_length(),
            spec.model.length()
        )));
    }
    Ok(data)
}

fn generate(a: GenerateArgs) -> CmdResult {
    let alphabet = alphabet(&a.alphabet)?;
    check_writable(&a.out, a.force)?;
    if a.users == 0 {
        return Err(Error::Invalid("--users must be at least 1".into()).into());
    }
    let rows: Vec<Sequence> = match a.model {
        GeneratorKind::Markov => {
            let phi = a.phi.ok_or_else(|| Error::Invalid("--phi is required for a Markov model".into()))?;
            let model = markov(&alphabet, a.length, phi, &a.initial)?;
            let seed = resolve_seed(a.seed);
            let mut rng = seeded(seed);
            (0..a.users).map(|_| model.sample_sequence(&mut rng)).collect()
        }
        GeneratorKind::Hmm => {
            let (pi, theta) = match (a.pi, a.theta) {
                (Some(pi), Some(theta)) => (pi, theta),
                _ => return Err(Error::Invalid("--pi and --theta are required for the HMM generator".into()).into()),
            };
            let seed = resolve_seed(a.seed);
            let reference = match (&a.reference, a.reference_rows) {
                (Some(path), _) => read_dataset(path, &alphabet)?.sequences,
                (None, Some(n)) if n > 0 => {
                    let uniform = MarkovChainModel::iid_uniform(a.length, alphabet.size())?;
                    let mut rng = substream(seed, &[1]);
                    (0..n).map(|_| uniform.sample_sequence(&mut rng)).collect()
                }
                _ => {
                    return Err(Error::Invalid("give --reference FILE or --reference-rows M (M >= 1)".into()).into())
                }
            };
            let config = HmmGeneratorConfig {
                reference,
                alphabet_size: alphabet.size(),
                switch_keep_prob: pi,
                substitution_prob: theta,
                seed,
            };
            hmm_generate(&config, a.users)?
        }
    };
    fs::write(&a.out, render_dataset(&rows, &alphabet))?;
    eprintln!("wrote {} sequences to {}", rows.len(), a.out.display());
    Ok(())
}

fn answer_local(a: AnswerLocalArgs) -> CmdResult {
    let spec = a.spec.resolve()?;
    let users = read_users(&a.input, &spec)?;
    if let Some(out) = &a.out {
        check_writable(out, a.force)?;
    }
    let kind = match a.mechanism {
        LocalKind::M1 => MechanismKind::M1,
        LocalKind::M2 => MechanismKind::M2,
    };
    let mech = build_mechanism(kind, spec.model.as_ref(), &spec.query, &spec.sensitive)?;
    let mut rng = seeded(resolve_seed(a.seed));
    let bits: Vec<bool> = users.sequences.iter().map(|s| release(&mech, s, &mut rng)).collect();
    if let Some(out) = &a.out {
        let text: String = bits.iter().map(|&b| if b { "1\n" } else { "0\n" }).collect();
        fs::write(out, text)?;
    }
    println!("mechanism,users,released_count");
    println!("{kind},{},{}", bits.len(), bits.iter().filter(|&&b| b).count());
    Ok(())
}

fn answer_central(a: AnswerCentralArgs) -> CmdResult {
    let spec = a.spec.resolve()?;
    let users = read_users(&a.input, &spec)?;
    let mech = CentralMechanism::new(spec.model.as_ref(), &spec.query, &spec.sensitive, users.sequences.len())?;
    let probs = mech.user_match_probs(&users.sequences)?;
    let count = users.sequences.iter().filter(|s| spec.query.true_answer(s)).count();
    let mut rng = seeded(resolve_seed(a.seed));
    let released = mech.release(count, &probs, &mut rng);
    println!("users,released_count");
    println!("{},{released}", users.sequences.len());
    Ok(())
}

fn error(a: QueryModelArgs) -> CmdResult {
    let spec = a.resolve()?;
    let report = error_probabilities(spec.model.as_ref(), &spec.query, &spec.sensitive)?;
    println!("{}", ErrorReport::CSV_HEADER);
    println!("{}", report.csv_row(&spec.model.describe()));
    Ok(())
}

fn print_lower_bound(a: QueryModelArgs) -> CmdResult {
    let spec = a.resolve()?;
    println!("{:?}", lower_bound(spec.model.as_ref(), &spec.query, &spec.sensitive)?);
    Ok(())
}

fn audit(a: AuditArgs) -> CmdResult {
    let spec = a.spec.resolve()?;
    let model = spec.model.as_ref();
    let report = match (a.mechanism, &a.table) {
        (_, Some(path)) => {
            let text = fs::read_to_string(path)?;
            let mech = LocalMechanism::from_table_csv(&text, spec.query.clone(), spec.sensitive.clone(), &spec.alphabet)?;
            audit_local_mechanism(&a, &spec, &mech)?
        }
        (AuditTarget::M1 | AuditTarget::M2, None) => {
            let kind = if a.mechanism == AuditTarget::M1 { MechanismKind::M1 } else { MechanismKind::M2 };
            let mech = build_mechanism(kind, model, &spec.query, &spec.sensitive)?;
            if let Some(out) = &a.export_table {
                check_writable(out, a.force)?;
                fs::write(out, mech.to_table_csv(&spec.alphabet))?;
            }
            audit_local_mechanism(&a, &spec, &mech)?
        }
        (AuditTarget::Central, None) => {
            if a.export_table.is_some() {
                return Err(Error::Invalid("--export-table applies to local mechanisms only".into()).into());
            }
            if a.empirical {
                audit_central_empirical(&a, &spec)?
            } else {
                let channel = build_central_channel(model, &spec.query, &spec.sensitive, a.users)
                    .inspect_err(|e| {
                        if e.is_capacity() {
                            eprintln!("hint: rerun with --empirical for a Monte Carlo audit");
                        }
                    })?;
                audit_central(&channel, model, &spec.query, &spec.sensitive, a.users)?
            }
        }
    };
    if a.json {
        println!("{}", report.to_json());
    } else {
        println!("{}", AuditReport::CSV_HEADER);
        println!("{}", report.csv_row());
    }
    if report.passed {
        Ok(())
    } else {
        eprintln!("audit failed: max deviation {:e} exceeds {:e}", report.max_deviation, report.tolerance);
        Err(Failure::AuditFailed)
    }
}

fn audit_local_mechanism(a: &AuditArgs, spec: &Spec, mech: &LocalMechanism) -> Result<AuditReport, Error> {
    if !a.empirical {
        return audit_local(mech, spec.model.as_ref());
    }
    let seed = resolve_seed(a.seed);
    audit_empirical(spec.model.as_ref(), &spec.sensitive, 2, a.trials, seed, |s, rng| {
        release(mech, s, rng) as usize
    })
}

/// Monte Carlo audit of the central release against the first user's
/// sensitive values; the other users are drawn from the prior in each trial.
fn audit_central_empirical(a: &AuditArgs, spec: &Spec) -> Result<AuditReport, Error> {
    let model = spec.model.as_ref();
    let mech = CentralMechanism::new(model, &spec.query, &spec.sensitive, a.users)?;
    let seed = resolve_seed(a.seed);
    audit_empirical(model, &spec.sensitive, a.users + 1, a.trials, seed, |first, rng| {
        let mut users = Vec::with_capacity(a.users);
        users.push(first.clone());
        users.extend((1..a.users).map(|_| model.sample_sequence(rng)));
        let probs = mech.user_match_probs(&users).expect("sampled users have positive probability");
        let count = users.iter().filter(|s| spec.query.true_answer(s)).count();
        mech.release(count, &probs, rng)
    })
}

fn plan(a: RunPlanArgs) -> CmdResult {
    let mut plan = ExperimentPlan::read(&a.plan).map_err(|e| match e {
        Error::Io(io) => Error::Invalid(format!("cannot read plan {}: {io}", a.plan.display())),
        other => other,
    })?;
    if let Some(t) = a.trials {
        plan.trials = t;
    }
    if let Some(k) = a.users {
        plan.users = k;
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if plan.trials == 0 || plan.users == 0 {
        return Err(Error::Invalid("trials and users must be at least 1".into()).into());
    }
    for p in ["results.csv", "audit.csv"] {
        check_writable(&a.out.join(p), a.force)?;
    }
    let output = run_plan(&plan)?;
    let (results, audits) = output.write_to(&a.out, a.force)?;
    eprintln!("wrote {} and {}", results.display(), audits.display());
    Ok(())
}

fn dp_match(a: DpMatchArgs) -> CmdResult {
    let eps = match a.metric {
        MatchMetric::Pe => epsilon_for_target_pe(a.target)?,
        MatchMetric::Eae => epsilon_for_target_error(a.target)?,
        MatchMetric::Mse => epsilon_for_target_mse(a.target, a.users)?,
    };
    println!("{eps:?}");
    Ok(())
}
