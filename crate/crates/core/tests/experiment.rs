use std::sync::Arc;

use ensemble_core::estimates::checkpoint;
use ensemble_core::estimates::{
    Attachment, Collector, Feature, Horizon, Output, OutputKind, ValueEstimate,
};
use ensemble_core::experiment::{run_experiment, ExperimentConfig};
use ensemble_core::factory::{Policy, ScenarioConfig};
use ensemble_core::model::{
    ComponentId, ComponentType, FieldKind, Population, TypeRegistry, Value,
};

fn small_experiment(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioConfig {
            shifts: 2,
            workers_per_shift: 30,
            standbys_per_shift: 20,
            seed,
            ..ScenarioConfig::default()
        },
        weeks: 2,
        schedule: vec![Policy::Rigid, Policy::Ml],
        write_datasets: false,
        ..ExperimentConfig::default()
    }
}

#[test]
fn examples_never_see_the_future() {
    // both the input and the label read the tick stamp: every example must
    // satisfy label - input == t exactly
    let mut registry = TypeRegistry::new();
    let s = registry
        .register(ComponentType::new("Clock").field("stamp", FieldKind::Number))
        .unwrap();
    let registry = Arc::new(registry);
    let est = ValueEstimate::new(
        "stamp",
        Attachment::Component { component_type: s },
        Output::component_field("stamp", OutputKind::Continuous),
        Horizon::new(1, 30).unwrap(),
    )
    .input(Feature::component_field("stamp"));
    let mut collector = Collector::new(&est, "leak");
    for now in 0..200 {
        let mut pop = Population::new(registry.clone());
        for id in 1..=3 {
            pop.insert(
                ComponentId(id),
                s,
                vec![("stamp", Value::Number(now as f64))],
            )
            .unwrap();
        }
        collector.collect_step(&est, &pop, now);
    }
    let data = collector.dataset();
    assert!(data.len() > 3 * 150 * 25);
    for e in data.iter() {
        assert_eq!(e.label - e.inputs[0], e.t as f64);
    }
}

#[test]
fn metrics_are_reproducible() {
    let a = run_experiment(&small_experiment(7)).unwrap();
    let b = run_experiment(&small_experiment(7)).unwrap();
    assert_eq!(a.metrics_csv(), b.metrics_csv());
    let c = run_experiment(&small_experiment(8)).unwrap();
    assert_ne!(a.metrics_csv(), c.metrics_csv());
}

#[test]
fn rigid_only_week_trains_nothing() {
    let cfg = ExperimentConfig {
        weeks: 1,
        schedule: vec![Policy::Rigid],
        ..small_experiment(3)
    };
    let r = run_experiment(&cfg).unwrap();
    assert!(r.trainings.is_empty());
    assert_eq!(r.metrics.len(), 7 * 2);
    assert_eq!(r.estimate_queries, (0, 0, 0));
}

#[test]
fn artifacts_are_written_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        out_dir: Some(dir.path().to_path_buf()),
        write_datasets: true,
        ..small_experiment(5)
    };
    let r = run_experiment(&cfg).unwrap();
    let names: Vec<String> = r
        .artifacts
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for want in [
        "dataset_week1.csv",
        "dataset_week2.csv",
        "estimator_training1.txt",
        "boundary_training1.csv",
        "metrics.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(metrics, r.metrics_csv());
    let file = std::fs::File::open(dir.path().join("estimator_training1.txt")).unwrap();
    let loaded = checkpoint::load(file).unwrap();
    assert_eq!(loaded.params(), r.trainings[0].estimator.params());
}

#[test]
fn learned_week_queries_the_estimate() {
    let r = run_experiment(&small_experiment(2)).unwrap();
    assert_eq!(r.trainings.len(), 1);
    assert!(r.estimate_queries.0 > 0);
    assert_eq!(r.estimate_queries.2, 0);
    assert_eq!(r.diagnostics.unauthorized_entries, 0);
    assert_eq!(r.diagnostics.cancel_conflicts, 0);
}
