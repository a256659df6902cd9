//! Reference checks for the estimator: finite differences, separable data
//! with a perceptron certificate, and output normalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimates::{Estimator, EstimatorKind, TrainingDataset};

fn random_kind(rng: &mut ChaCha8Rng) -> EstimatorKind {
    match rng.gen_range(0..3) {
        0 => EstimatorKind::Binary,
        1 => EstimatorKind::Categorical(rng.gen_range(2..=4)),
        _ => EstimatorKind::Regression,
    }
}

fn random_label(kind: EstimatorKind, rng: &mut ChaCha8Rng) -> f64 {
    match kind {
        EstimatorKind::Binary => rng.gen_range(0..2) as f64,
        EstimatorKind::Categorical(k) => rng.gen_range(0..k) as f64,
        EstimatorKind::Regression => rng.gen_range(-3.0..3.0),
    }
}

/// Random network with non-zero biases and a small random dataset.
pub fn random_configuration(seed: u64) -> (Estimator, TrainingDataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = random_kind(&mut rng);
    let inputs = rng.gen_range(1..=5);
    let hidden = rng.gen_range(1..=16);
    let scaling: Vec<(f64, f64)> = (0..inputs)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0)))
        .collect();
    let mut est = Estimator::init(kind, inputs, hidden, scaling, seed);
    for p in est.params_mut() {
        *p += rng.gen_range(-0.3..0.3);
    }
    let mut data = TrainingDataset::new("gradient", inputs);
    for _ in 0..rng.gen_range(1..=12) {
        let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
        data.push(1, &x, random_label(kind, &mut rng))
            .expect("matching width");
    }
    (est, data)
}

/// Relative error `|g - fd| / max(|g| + |fd|, 1e-12)` in the Euclidean norm
/// between the analytic gradient and central differences with step `h`.
pub fn gradient_relative_error(est: &Estimator, data: &TrainingDataset, h: f64) -> f64 {
    let rows: Vec<usize> = (0..data.len()).collect();
    let (_, analytic) = est.loss_and_gradient(data, &rows);
    let mut probe = est.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = probe.loss_and_gradient(data, &rows).0;
        probe.params_mut()[i] = orig - h;
        let down = probe.loss_and_gradient(data, &rows).0;
        probe.params_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * h));
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, b)| a - b));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    diff / scale.max(1e-12)
}

/// `n` points in [-5, 5]^2 at distance at least `margin` from a random line,
/// labeled by side. Returns the data and the line `(w, b)`.
pub fn separable_set(seed: u64, n: usize, margin: f64) -> (TrainingDataset, [f64; 3]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (w0, w1) = (angle.cos(), angle.sin());
    let b = rng.gen_range(-1.0..1.0);
    let mut data = TrainingDataset::new("separable", 2);
    while data.len() < n {
        let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let d = w0 * x[0] + w1 * x[1] + b;
        if d.abs() >= margin {
            data.push(1, &x, (d > 0.0) as u8 as f64).expect("width 2");
        }
    }
    (data, [w0, w1, b])
}

/// Perceptron certificate of linear separability: returns the number of
/// passes needed to classify every example correctly, or `None` if
/// `max_passes` do not suffice.
pub fn perceptron_passes(data: &TrainingDataset, max_passes: usize) -> Option<usize> {
    let dim = data.n_features();
    let mut w = vec![0.0; dim + 1];
    for pass in 1..=max_passes {
        let mut mistakes = 0;
        for i in 0..data.len() {
            let x = data.inputs(i);
            let y = if data.label(i) > 0.5 { 1.0 } else { -1.0 };
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim];
            if y * s <= 0.0 {
                mistakes += 1;
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi += y * xi;
                }
                w[dim] += y;
            }
        }
        if mistakes == 0 {
            return Some(pass);
        }
    }
    None
}

/// Largest `|sum(p) - 1|` over random categorical networks and inputs.
pub fn softmax_max_deviation(seeds: std::ops::Range<u64>) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(2..=8);
        let inputs = rng.gen_range(1..=6);
        let mut est = Estimator::init(
            EstimatorKind::Categorical(k),
            inputs,
            16,
            vec![(0.0, 1.0); inputs],
            seed,
        );
        for p in est.params_mut() {
            *p *= rng.gen_range(0.5..20.0);
        }
        for _ in 0..20 {
            let x: Vec<f64> = (0..inputs).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let p = est.predict(&x).expect("width matches");
            let dist = p.distribution().expect("categorical");
            worst = worst.max((dist.iter().sum::<f64>() - 1.0).abs());
        }
    }
    worst
}
