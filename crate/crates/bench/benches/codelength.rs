use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mapeq_core::autodiff::Tape;
use mapeq_core::flow::FlowOptions;
use mapeq_core::FlowModel;
use mapeq_core::generators::{barbell, generate_planted, random_graph};
use mapeq_core::mapeq::{
    brute_force_optimum, codelength_entropy_form, codelength_expanded_form, record_soft_loss,
    SOFT_EPS,
};
use mapeq_core::neural::{encode, init_params, normalize_adjacency};
use mapeq_core::{identity_features, Architecture, EncoderConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hard_evaluators(c: &mut Criterion) {
    let mut group = c.benchmark_group("hard");
    for n in [100usize, 1000] {
        // Expected within-block degree of 12 keeps every size connected.
        let (g, truth) = generate_planted(4, n / 4, 48.0 / n as f64, 0.5 / n as f64, 1).unwrap();
        let flow = FlowModel::with_defaults(&g).unwrap();
        group.bench_with_input(BenchmarkId::new("entropy", n), &truth, |b, p| {
            b.iter(|| codelength_entropy_form(&flow, black_box(p)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("expanded", n), &truth, |b, p| {
            b.iter(|| codelength_expanded_form(&flow, black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn power_iteration(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_graph(500, 0.02, true, true, &mut rng);
    let opts = FlowOptions::default();
    c.bench_function("power_iteration/500", |b| {
        b.iter(|| FlowModel::new(black_box(&g), &opts).unwrap())
    });
}

/// One training step's worth of work: encoder, pooled loss and backward.
fn soft_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("soft_step");
    for arch in [Architecture::Mlp, Architecture::Gcn] {
        let (g, _) = generate_planted(4, 50, 0.25, 0.005, 3).unwrap();
        let flow = FlowModel::with_defaults(&g).unwrap();
        let f = flow.shared_flow();
        let x = identity_features(&g);
        let enc = EncoderConfig::for_graph(arch, g.n());
        let params = init_params(&enc, x.cols(), 0).unwrap();
        let op = normalize_adjacency(&g, arch);
        group.bench_function(BenchmarkId::new(arch.name(), g.n()), |b| {
            b.iter(|| {
                let mut tape = Tape::new();
                let e = encode(&params, &op, x.values(), None, &mut tape).unwrap();
                let l = record_soft_loss(&mut tape, &f, flow.visit_rates(), e.assignments, SOFT_EPS)
                    .unwrap();
                tape.backward(l.loss).unwrap()
            })
        });
    }
    group.finish();
}

fn brute_force(c: &mut Criterion) {
    let (g, _) = barbell();
    let flow = FlowModel::with_defaults(&g).unwrap();
    c.bench_function("brute_force/6", |b| b.iter(|| brute_force_optimum(black_box(&flow), 10).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_graph(8, 0.4, false, true, &mut rng);
    let flow = FlowModel::with_defaults(&g).unwrap();
    let mut group = c.benchmark_group("brute_force");
    group.sample_size(10);
    group.bench_function("8", |b| b.iter(|| brute_force_optimum(black_box(&flow), 10).unwrap()));
    group.finish();
}

criterion_group!(benches, hard_evaluators, power_iteration, soft_step, brute_force);
criterion_main!(benches);
