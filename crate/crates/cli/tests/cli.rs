use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn zeroleak(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeroleak"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_markov_constant_rows_and_seed_determinism() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("d.txt");
    let o = zeroleak(&["generate", "--phi", "1", "--users", "20", "--seed", "4", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        assert_eq!(line.len(), 10);
        assert!(line.chars().all(|c| c == line.chars().next().unwrap()));
    }

    let again = dir.path().join("e.txt");
    zeroleak(&["generate", "--phi", "0.4", "--users", "50", "--seed", "9", "--out", p(&out), "--force"]);
    zeroleak(&["generate", "--phi", "0.4", "--users", "50", "--seed", "9", "--out", p(&again)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn generate_refuses_to_overwrite_without_force() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("d.txt");
    fs::write(&out, "keep").unwrap();
    let o = zeroleak(&["generate", "--phi", "0.5", "--users", "3", "--seed", "1", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_to_string(&out).unwrap(), "keep");
}

#[test]
fn generate_prints_seed_when_omitted() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("d.txt");
    let o = zeroleak(&["generate", "--phi", "0.5", "--users", "3", "--out", p(&out)]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("seed: "));
}

#[test]
fn generate_hmm_copies_reference_rows() {
    let dir = tempdir().unwrap();
    let reference = dir.path().join("ref.txt");
    fs::write(&reference, "AATT\nGGCC\nATGC\n").unwrap();
    let out = dir.path().join("d.txt");
    let o = zeroleak(&[
        "generate", "--model", "hmm", "--reference", p(&reference), "--pi", "1", "--theta", "0",
        "--users", "40", "--seed", "2", "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = ["AATT", "GGCC", "ATGC"];
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 40);
    assert!(text.lines().all(|l| rows.contains(&l)));
}

#[test]
fn error_reports_iid_and_subset_cases() {
    // Independent uniform positions, no overlap: zero best error.
    let o = zeroleak(&["error", "--phi", "0.25", "--loci", "5,6", "--values", "A,T", "--sensitive", "3,4"]);
    assert!(o.status.success());
    let row: Vec<String> = stdout(&o).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[5], "0.0");

    // Queried loci inside the sensitive set: best error is the smaller prior mass.
    let o = zeroleak(&["error", "--phi", "0.25", "--loci", "3,4", "--values", "AT", "--sensitive", "3,4"]);
    let row: Vec<String> = stdout(&o).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[5], "0.0625");
    let bound: f64 = row[6].parse().unwrap();
    assert!((bound - 0.0625).abs() < 1e-9);
}

#[test]
fn malformed_loci_is_a_usage_error() {
    for loci in ["0,1", "x", "4,3"] {
        let o = zeroleak(&["error", "--phi", "0.5", "--loci", loci, "--values", "AT"]);
        assert_eq!(o.status.code(), Some(1), "loci {loci}");
    }
    let o = zeroleak(&["error", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lower_bound_prints_a_number() {
    let o = zeroleak(&["lower-bound", "--phi", "0.7", "--loci", "2,3", "--values", "AT", "--sensitive", "1"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((0.0..=0.5).contains(&v));
}

#[test]
fn audit_builtins_pass_and_corrupted_table_fails() {
    let dir = tempdir().unwrap();
    let table = dir.path().join("m1.csv");
    let base = ["--phi", "0.6", "--length", "5", "--loci", "3,4", "--values", "AT", "--sensitive", "2"];
    for m in ["m1", "m2"] {
        let mut args = vec!["audit", "--mechanism", m];
        args.extend(base);
        assert_eq!(zeroleak(&args).status.code(), Some(0), "{m}");
    }

    let mut args = vec!["audit", "--mechanism", "m1", "--export-table", p(&table)];
    args.extend(base);
    assert!(zeroleak(&args).status.success());
    let text = fs::read_to_string(&table).unwrap();
    let corrupted: String = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == 1 { "AA,A,0.9\n".to_string() } else { format!("{l}\n") })
        .collect();
    fs::write(&table, corrupted).unwrap();

    let mut args = vec!["audit", "--table", p(&table)];
    args.extend(base);
    let o = zeroleak(&args);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    assert!(stdout(&o).contains("false"));
}

#[test]
fn central_audit_capacity_and_empirical_fallback() {
    let base = ["--phi", "0.6", "--length", "4", "--loci", "3,4", "--values", "AT", "--sensitive", "1,2"];
    let mut args = vec!["audit", "--mechanism", "central", "--users", "3"];
    args.extend(base);
    assert_eq!(zeroleak(&args).status.code(), Some(0));

    let mut args = vec!["audit", "--mechanism", "central", "--users", "8"];
    args.extend(base);
    let o = zeroleak(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--empirical"));

    let mut args = vec![
        "audit", "--mechanism", "central", "--users", "8", "--empirical", "--trials", "20000", "--seed", "5", "--json",
    ];
    args.extend(base);
    let o = zeroleak(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("\"method\": \"empirical\"") || stdout(&o).contains("\"method\":\"empirical\""));
}

#[test]
fn answers_are_reproducible() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("d.txt");
    zeroleak(&["generate", "--phi", "0.7", "--users", "200", "--seed", "3", "--out", p(&data)]);
    let local = |seed: &str| {
        stdout(&zeroleak(&[
            "answer-local", "--mechanism", "m1", "--phi", "0.7", "--loci", "5,6", "--values", "AT",
            "--sensitive", "4", "--input", p(&data), "--seed", seed,
        ]))
    };
    assert_eq!(local("1"), local("1"));
    assert!(local("1").starts_with("mechanism,users,released_count\nm1,200,"));

    let central = |seed: &str| {
        stdout(&zeroleak(&[
            "answer-central", "--data", p(&data), "--loci", "5,6", "--values", "AT", "--sensitive", "4",
            "--input", p(&data), "--seed", seed,
        ]))
    };
    assert_eq!(central("8"), central("8"));
    let count: usize = central("8").lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(count <= 200);

    let bits = dir.path().join("bits.txt");
    let o = zeroleak(&[
        "answer-local", "--mechanism", "m2", "--phi", "0.7", "--loci", "5,6", "--values", "AT",
        "--input", p(&data), "--seed", "1", "--out", p(&bits),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&bits).unwrap().lines().count(), 200);
}

#[test]
fn input_length_must_match_model() {
    let dir = tempdir().unwrap();
    let data = dir.path().join("d.txt");
    fs::write(&data, "ATGC\nATGC\n").unwrap();
    let o = zeroleak(&[
        "answer-local", "--mechanism", "m1", "--phi", "0.7", "--loci", "2,3", "--values", "AT",
        "--input", p(&data), "--seed", "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn dp_match_recovers_known_budget() {
    let o = zeroleak(&["dp-match", "--metric", "eae", "--target", "0.5"]);
    let eps: f64 = stdout(&o).trim().parse().unwrap();
    assert!((eps - 2.0).abs() < 1e-6);
    let o = zeroleak(&["dp-match", "--metric", "pe", "--target", "0.7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn run_plan_is_deterministic_and_guards_output() {
    let dir = tempdir().unwrap();
    let plan = dir.path().join("tiny.plan");
    fs::write(
        &plan,
        "scenario = tiny\nmodel = markov\nphi = 0.5,0.9\nusers = 5\nlength = 6\nloci = 3,4\nvalues = A,T\n\
         sensitive = 2\ntrials = 50\nseed = 11\nmechanisms = m1,m2,central,rr\n",
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(zeroleak(&["run-plan", p(&plan), "--out", p(&a)]).status.success());
    assert!(zeroleak(&["run-plan", p(&plan), "--out", p(&b)]).status.success());
    for f in ["results.csv", "audit.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let results = fs::read_to_string(a.join("results.csv")).unwrap();
    assert!(results.starts_with("scenario,point,mechanism,metric,source,value,std_error,trials\n"));

    assert_eq!(zeroleak(&["run-plan", p(&plan), "--out", p(&a)]).status.code(), Some(1));
    assert!(zeroleak(&["run-plan", p(&plan), "--out", p(&a), "--force"]).status.success());

    let missing = dir.path().join("nope.plan");
    let o = zeroleak(&["run-plan", p(&missing), "--out", p(&a), "--force"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_plans_parse() {
    let plans = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../plans");
    for name in ["fig3a.plan", "fig5.plan", "fig5b.plan", "fig6.plan"] {
        let text = fs::read_to_string(plans.join(name)).unwrap();
        assert!(text.parse::<zeroleak::sim::ExperimentPlan>().is_ok(), "{name}");
    }
}
