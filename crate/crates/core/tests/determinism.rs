use splitree::experiments::{run_with, ExperimentConfig, Measures};
use splitree::fixpoint::{apply_t_seeded, iterate_with, EmpiricalDistribution, FixpointConfig};
use splitree::par::{with_threads, Execution};
use splitree::renewal::{renewal_u, RenewalConfig, RenewalMethod};
use splitree::ModelSpec;

fn presets() -> Vec<ModelSpec> {
    vec![
        ModelSpec::bst(),
        ModelSpec::mary(3).unwrap(),
        ModelSpec::lattice_example(),
        ModelSpec::trie(&[0.6, 0.4]).unwrap(),
        ModelSpec::quadtree(2).unwrap(),
    ]
}

#[test]
fn experiments_do_not_depend_on_execution_mode() {
    for model in presets() {
        let mut cfg = ExperimentConfig::new(&model.id(), vec![10, 300], 40, 99);
        cfg.measures = Measures::all();
        let par = run_with(&cfg, &model, Execution::Parallel).unwrap();
        let seq = run_with(&cfg, &model, Execution::Sequential).unwrap();
        assert_eq!(par.records, seq.records, "{}", model.id());
        let one = with_threads(1, || run_with(&cfg, &model, Execution::Parallel).unwrap());
        let three = with_threads(3, || run_with(&cfg, &model, Execution::Parallel).unwrap());
        assert_eq!(one.records, three.records);
        assert_eq!(one.records, par.records);
    }
}

#[test]
fn fixpoint_iteration_is_reproducible() {
    let bst = ModelSpec::bst();
    let mut cfg = FixpointConfig::new(5_000, 0.05, 30, 4);
    cfg.patience = 1;
    let a = iterate_with(&bst, &cfg, Execution::Parallel).unwrap();
    let b = iterate_with(&bst, &cfg, Execution::Sequential).unwrap();
    assert_eq!(a.steps, b.steps);
    assert_eq!(a.distribution, b.distribution);

    let input = EmpiricalDistribution::from_samples((0..3000).map(|i| i as f64 / 3000.0 - 0.5).collect());
    let x = with_threads(1, || apply_t_seeded(&input, &bst, 0.5, 10_000, 8, Execution::Parallel));
    let y = with_threads(4, || apply_t_seeded(&input, &bst, 0.5, 10_000, 8, Execution::Parallel));
    assert_eq!(x, y);
}

#[test]
fn renewal_tables_are_reproducible() {
    let bst = ModelSpec::bst();
    for method in [RenewalMethod::BranchingEnumeration, RenewalMethod::TiltedWalkMc] {
        let mut cfg = RenewalConfig::new(5.0, 0.1, method, 12);
        cfg.walks_per_replica = 200;
        let a = with_threads(1, || renewal_u(&bst, &cfg).unwrap());
        let b = with_threads(3, || renewal_u(&bst, &cfg).unwrap());
        assert_eq!(a, b);
    }
}

#[test]
fn different_seeds_differ() {
    let bst = ModelSpec::bst();
    let a = run_with(&ExperimentConfig::new("bst", vec![500], 20, 1), &bst, Execution::Parallel).unwrap();
    let b = run_with(&ExperimentConfig::new("bst", vec![500], 20, 2), &bst, Execution::Parallel).unwrap();
    assert_ne!(a.records[0].psi, b.records[0].psi);
}
