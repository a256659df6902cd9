use ensemble_core::estimates::{self, EstimatorKind, Hyperparams, TrainSpec, TrainingDataset};
use ensemble_core::oracle::learning::{
    gradient_relative_error, perceptron_passes, random_configuration, separable_set,
    softmax_max_deviation,
};

#[test]
fn gradients_match_finite_differences() {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let (est, data) = random_configuration(seed);
        let err = gradient_relative_error(&est, &data, 1e-6);
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
        worst = worst.max(err);
    }
    eprintln!("worst gradient relative error {worst:e}");
}

#[test]
fn separable_set_is_learned() {
    let (data, _) = separable_set(7, 200, 1.0);
    assert!(
        perceptron_passes(&data, 1000).is_some(),
        "oracle: not separable"
    );
    let spec = TrainSpec::plain(EstimatorKind::Binary, 2);
    let (est, report) = estimates::train(&data, &spec, &Hyperparams::default()).unwrap();
    let acc = est.accuracy(&data);
    assert!(
        acc >= 0.95,
        "accuracy {acc}, losses {:?}",
        report.epoch_losses.last()
    );
}

#[test]
fn categorical_outputs_are_distributions() {
    assert!(softmax_max_deviation(0..50) <= 1e-6);
}

#[test]
fn constant_labels_are_fitted() {
    let mut data = TrainingDataset::new("const", 1);
    for i in 0..400 {
        data.push(1, &[i as f64 / 20.0], 1.0).unwrap();
    }
    let spec = TrainSpec {
        standardize: vec![true],
        ..TrainSpec::plain(EstimatorKind::Binary, 1)
    };
    let (est, report) = estimates::train(&data, &spec, &Hyperparams::default()).unwrap();
    assert!(report.degenerate_labels);
    for i in 0..400 {
        let p = est.predict(&[i as f64 / 20.0]).unwrap().value();
        assert!(p >= 0.9, "p({i}) = {p}");
    }
}

#[test]
fn update_on_the_same_data_does_not_increase_loss() {
    let (data, _) = separable_set(3, 200, 0.5);
    let spec = TrainSpec::plain(EstimatorKind::Binary, 2);
    let hp = Hyperparams {
        epochs: 5,
        ..Hyperparams::default()
    };
    let (est, _) = estimates::train(&data, &spec, &hp).unwrap();
    let before = est.loss(&data);
    let (updated, _) = estimates::update(&est, &data, &hp).unwrap();
    assert!(
        updated.loss(&data) <= before,
        "{} > {before}",
        updated.loss(&data)
    );
}

#[test]
fn empty_update_with_zero_epochs_keeps_weights() {
    let (data, _) = separable_set(5, 50, 0.5);
    let spec = TrainSpec::plain(EstimatorKind::Binary, 2);
    let (est, _) = estimates::train(&data, &spec, &Hyperparams::default()).unwrap();
    let hp = Hyperparams {
        epochs: 0,
        ..Hyperparams::default()
    };
    let (same, _) = estimates::update(&est, &TrainingDataset::new("separable", 2), &hp).unwrap();
    assert_eq!(same.params(), est.params());
}

#[test]
fn training_is_bit_reproducible() {
    let (data, _) = separable_set(9, 120, 0.5);
    let spec = TrainSpec::plain(EstimatorKind::Binary, 2);
    let a = estimates::train(&data, &spec, &Hyperparams::default())
        .unwrap()
        .0;
    let b = estimates::train(&data, &spec, &Hyperparams::default())
        .unwrap()
        .0;
    assert!(a
        .params()
        .iter()
        .zip(b.params())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}
