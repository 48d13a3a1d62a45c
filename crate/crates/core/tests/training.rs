//! End-to-end behaviour of training, checkpoints and the experiment harness.

use std::fs;

use mapeq_core::autodiff::Tape;
use mapeq_core::generators::{barbell, overlapping_triangles, random_graph};
use mapeq_core::harness::{load_lfr, run_experiment, ExperimentSpec, Summary};
use mapeq_core::mapeq::{brute_force_optimum, record_soft_loss, SOFT_EPS};
use mapeq_core::neural::{encode, init_params, normalize_adjacency, EncoderParams};
use mapeq_core::{
    ami, identity_features, train, Architecture, EncoderConfig, FlowModel, Partition, TrainConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quick(arch: Architecture, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::for_arch(arch);
    cfg.seed = seed;
    cfg.max_epochs = 400;
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extracted_partition_never_beats_the_oracle(n in 3usize..9, directed in any::<bool>(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.45, directed, true, &mut rng);
        let flow = FlowModel::with_defaults(&g).unwrap();
        let (_, best) = brute_force_optimum(&flow, 10).unwrap();
        let mut enc = EncoderConfig::for_graph(Architecture::Linear, n);
        enc.s = n;
        let r = train(&g, &identity_features(&g), &enc, &quick(Architecture::Linear, seed)).unwrap();
        prop_assert!(r.hard_codelength >= best.total - 1e-6);
        let min = r.loss_history.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.best_loss_bits, min);
        prop_assert_eq!(r.loss_history[r.best_epoch], r.best_loss_bits);
    }
}

#[test]
fn soft_loss_can_undercut_every_hard_partition() {
    // The bridge node is shared by both triangles, which no hard partition can
    // express; the trained soft loss lands below the exhaustive optimum.
    let g = overlapping_triangles();
    let flow = FlowModel::with_defaults(&g).unwrap();
    let (_, best) = brute_force_optimum(&flow, 10).unwrap();
    let mut enc = EncoderConfig::for_graph(Architecture::Linear, 7);
    enc.s = 7;
    let mut cfg = TrainConfig::for_arch(Architecture::Linear);
    cfg.trials = 3;
    let r = train(&g, &identity_features(&g), &enc, &cfg).unwrap();
    assert!(r.best_loss_bits < best.total - 1e-3, "{} vs {}", r.best_loss_bits, best.total);
    assert!(r.hard_codelength >= best.total - 1e-12);
}

#[test]
fn identical_runs_are_bit_identical() {
    let (g, _) = barbell();
    let x = identity_features(&g);
    for arch in Architecture::ALL {
        let enc = EncoderConfig::for_graph(arch, 6);
        let mut cfg = quick(arch, 5);
        cfg.max_epochs = 80;
        cfg.trials = 2;
        let a = train(&g, &x, &enc, &cfg).unwrap();
        let b = train(&g, &x, &enc, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history, "{arch}");
        assert_eq!(a.best_params, b.best_params, "{arch}");
        assert_eq!(a.partition, b.partition, "{arch}");
    }
}

#[test]
fn backward_is_deterministic() {
    let (g, _) = barbell();
    let flow = FlowModel::with_defaults(&g).unwrap();
    let x = identity_features(&g);
    let enc = EncoderConfig::for_graph(Architecture::Gin, 6);
    let params = init_params(&enc, 6, 3).unwrap();
    let op = normalize_adjacency(&g, Architecture::Gin);
    let grads = || {
        let mut tape = Tape::new();
        let e = encode(&params, &op, x.values(), None, &mut tape).unwrap();
        let l = record_soft_loss(&mut tape, &flow.shared_flow(), flow.visit_rates(), e.assignments, SOFT_EPS).unwrap();
        let mut g = tape.backward(l.loss).unwrap();
        e.params
            .iter()
            .zip(params.tensors())
            .map(|(&v, t)| g.take_or_zeros(v, t.shape()))
            .collect::<Vec<_>>()
    };
    assert_eq!(grads(), grads());
}

#[test]
fn checkpoint_round_trip_reproduces_logits() {
    let (g, _) = barbell();
    let x = identity_features(&g);
    let enc = EncoderConfig::for_graph(Architecture::Sage, 6);
    let r = train(&g, &x, &enc, &quick(Architecture::Sage, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("encoder.json");
    r.best_params.save(&path).unwrap();
    let loaded = EncoderParams::load(&path).unwrap();
    assert_eq!(loaded, r.best_params);
    let op = normalize_adjacency(&g, Architecture::Sage);
    let assignments = |p: &EncoderParams| {
        let mut tape = Tape::new();
        let e = encode(p, &op, x.values(), None, &mut tape).unwrap();
        tape.value(e.assignments).clone()
    };
    assert_eq!(assignments(&loaded), *r.best_s.tensor());
}

#[test]
fn experiment_tables_are_reproducible() {
    let spec = ExperimentSpec::from_toml(
        r#"
        name = "planted"
        trials = 3
        seed = 11

        [graph]
        kind = "planted"
        blocks = 2
        size = 10
        p_in = 0.6
        p_out = 0.02
        seed = 4

        [encoder]
        arch = "mlp"

        [train]
        max_epochs = 300
        "#,
    )
    .unwrap();
    let a = run_experiment(&spec).unwrap();
    let b = run_experiment(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 3);
    assert_eq!(Summary::of(&a.rows), a.summary);
    assert_eq!(a.rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![11, 12, 13]);
    assert!(a.summary.ami.is_some());
}

#[test]
fn lfr_files_are_reindexed() {
    let dir = tempfile::tempdir().unwrap();
    let network = dir.path().join("network.dat");
    let community = dir.path().join("community.dat");
    // Two triangles joined by one edge, each edge listed in both directions.
    let edges = [(1, 2), (1, 3), (2, 3), (4, 5), (4, 6), (5, 6), (3, 4)];
    let mut text = String::new();
    for (u, v) in edges {
        text.push_str(&format!("{u}\t{v}\n{v}\t{u}\n"));
    }
    fs::write(&network, text).unwrap();
    fs::write(&community, "1 1\n2 1\n3 1\n4 2\n5 2\n6 2\n").unwrap();
    let (g, truth) = load_lfr(&network, &community, false).unwrap();
    let (reference, expected) = barbell();
    assert_eq!(g.n(), 6);
    assert_eq!(g.total_weight(), reference.total_weight());
    assert_eq!(ami(&truth, &expected).unwrap(), 1.0);
    assert_eq!(truth, Partition::from_labels(&[0, 0, 0, 1, 1, 1]));
}
