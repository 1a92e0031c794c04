use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use zeroleak::audit::audit_local;
use zeroleak::central::{build_central_channel, CentralMechanism};
use zeroleak::local::{release, LocalAnalysis, LocalMechanism, MechanismKind};
use zeroleak::model::{hmm_generate, HmmGeneratorConfig};
use zeroleak::rng::seeded;
use zeroleak::{LocusSet, MarkovChainModel, Query, Sequence, SequenceModel};

fn setup() -> (MarkovChainModel, Query, LocusSet) {
    let model = MarkovChainModel::symmetric(10, MarkovChainModel::uniform_initial(4), 0.6).unwrap();
    let query = Query::new(LocusSet::new(vec![5, 6]).unwrap(), vec![0, 1]).unwrap();
    let sensitive = LocusSet::new(vec![3, 4]).unwrap();
    (model, query, sensitive)
}

fn local(c: &mut Criterion) {
    let (model, query, sensitive) = setup();
    c.bench_function("local_analysis", |b| {
        b.iter(|| LocalAnalysis::new(black_box(&model), &query, &sensitive).unwrap())
    });

    let analysis = LocalAnalysis::new(&model, &query, &sensitive).unwrap();
    let mech = LocalMechanism::from_analysis(MechanismKind::M1, &analysis).unwrap();
    let mut rng = seeded(1);
    let users: Vec<Sequence> = (0..1000).map(|_| model.sample_sequence(&mut rng)).collect();
    c.bench_function("local_release_1000_users", |b| {
        b.iter(|| users.iter().filter(|s| release(&mech, s, &mut rng)).count())
    });
    c.bench_function("audit_local_exact", |b| b.iter(|| audit_local(&mech, &model).unwrap()));
}

fn central(c: &mut Criterion) {
    let (model, query, sensitive) = setup();
    let mut group = c.benchmark_group("central_mechanism");
    group.sample_size(10);
    for users in [100usize, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(users), &users, |b, &k| {
            b.iter(|| CentralMechanism::new(&model, &query, &sensitive, k).unwrap().expected_error())
        });
    }
    group.bench_function("channel_k4_s2", |b| {
        b.iter(|| build_central_channel(&model, &query, &sensitive, 4).unwrap())
    });
    group.finish();
}

fn generator(c: &mut Criterion) {
    let uniform = MarkovChainModel::iid_uniform(20, 4).unwrap();
    let mut rng = seeded(2);
    let reference: Vec<Sequence> = (0..100).map(|_| uniform.sample_sequence(&mut rng)).collect();
    let config = HmmGeneratorConfig {
        reference,
        alphabet_size: 4,
        switch_keep_prob: 0.3,
        substitution_prob: 0.01,
        seed: 3,
    };
    c.bench_function("hmm_generate_1000", |b| b.iter(|| hmm_generate(&config, 1000).unwrap()));
}

criterion_group!(benches, local, central, generator);
criterion_main!(benches);
