//! Throughput of the replica executor: data-parallel versus sequential on
//! the two workloads that dominate the checks (first passages of a
//! compound Poisson model and closed-form lifetimes of the stable
//! subordinator).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use reslevy::exec::{domain, map_replicas, map_replicas_sequential, substream};
use reslevy::resurrection::{simulate_lifetime, AbsorptionPolicy, KernelMode};
use reslevy::{first_passage_below, make_model, ExpJumps, ModelSpec, SimParams};

const REPLICAS: usize = 2000;

fn first_passages(c: &mut Criterion) {
    let model = make_model(ModelSpec::CompoundPoissonDrift {
        drift: -0.5,
        jumps: ExpJumps::symmetric(1.0, 1.0),
    })
    .unwrap();
    let params = SimParams::default();
    let work = |i: usize| {
        let mut rng = substream(1, domain::PATHS, i as u64);
        first_passage_below(&model, 1.0, &params, &mut rng)
            .unwrap()
            .tau
    };
    let mut g = c.benchmark_group("first_passage_cp");
    g.bench_function(BenchmarkId::new("parallel", REPLICAS), |b| {
        b.iter(|| map_replicas(REPLICAS, work).iter().sum::<f64>())
    });
    g.bench_function(BenchmarkId::new("sequential", REPLICAS), |b| {
        b.iter(|| map_replicas_sequential(REPLICAS, work).iter().sum::<f64>())
    });
    g.finish();
}

fn lifetimes(c: &mut Criterion) {
    let model = make_model(ModelSpec::StableSubordinatorNeg { alpha: 0.5 }).unwrap();
    let params = SimParams::default();
    let policy = AbsorptionPolicy::default();
    let work = |i: usize| {
        let mut rng = substream(1, domain::LIFETIME, i as u64);
        simulate_lifetime(
            &model,
            1.0,
            &params,
            &policy,
            KernelMode::ClosedForm,
            &mut rng,
        )
        .unwrap()
        .zeta
        .value()
    };
    let mut g = c.benchmark_group("lifetime_stable_subordinator");
    g.bench_function(BenchmarkId::new("parallel", REPLICAS), |b| {
        b.iter(|| map_replicas(REPLICAS, work).iter().sum::<f64>())
    });
    g.bench_function(BenchmarkId::new("sequential", REPLICAS), |b| {
        b.iter(|| map_replicas_sequential(REPLICAS, work).iter().sum::<f64>())
    });
    g.finish();
}

criterion_group!(benches, first_passages, lifetimes);
criterion_main!(benches);
