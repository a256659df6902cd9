//! One-hidden-layer feed-forward network used as the estimator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::TrainingDataset;
use super::spec::{Horizon, OutputKind, ValueEstimate};
use super::EstimateError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Binary,
    Categorical(usize),
    Regression,
}

impl EstimatorKind {
    pub fn outputs(&self) -> usize {
        match self {
            EstimatorKind::Categorical(k) => *k,
            _ => 1,
        }
    }
}

impl From<OutputKind> for EstimatorKind {
    fn from(kind: OutputKind) -> Self {
        match kind {
            OutputKind::Binary => EstimatorKind::Binary,
            OutputKind::Categorical(k) => EstimatorKind::Categorical(k),
            OutputKind::Continuous => EstimatorKind::Regression,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Re-initialize and fit from scratch on update instead of continuing.
    pub full_retrain: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            hidden: 16,
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            full_retrain: false,
        }
    }
}

/// What training needs to know about the estimate besides its data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub kind: EstimatorKind,
    /// Per-feature flag: standardize with statistics from the first training set.
    pub standardize: Vec<bool>,
    pub horizon: Option<Horizon>,
}

impl TrainSpec {
    pub fn plain(kind: EstimatorKind, n_features: usize) -> Self {
        Self {
            kind,
            standardize: vec![false; n_features],
            horizon: None,
        }
    }
}

impl From<&ValueEstimate> for TrainSpec {
    fn from(e: &ValueEstimate) -> Self {
        Self {
            kind: e.output.kind.into(),
            standardize: e.standardized_mask(),
            horizon: Some(e.horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub examples: usize,
    /// Mean batch loss over each epoch.
    pub epoch_losses: Vec<f64>,
    /// Binary data holding a single class.
    pub degenerate_labels: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Probability(f64),
    Distribution(Vec<f64>),
    Value(f64),
}

impl Prediction {
    pub fn probability(&self) -> Option<f64> {
        match self {
            Prediction::Probability(p) => Some(*p),
            _ => None,
        }
    }

    pub fn distribution(&self) -> Option<&[f64]> {
        match self {
            Prediction::Distribution(d) => Some(d),
            _ => None,
        }
    }

    /// Most likely class for categorical outputs, thresholded class for binary ones.
    pub fn class(&self) -> Option<usize> {
        match self {
            Prediction::Probability(p) => Some((*p >= 0.5) as usize),
            Prediction::Distribution(d) => d
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i),
            Prediction::Value(_) => None,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Prediction::Probability(p) => *p,
            Prediction::Distribution(d) => self.class().map_or(f64::NAN, |c| d[c]),
            Prediction::Value(v) => *v,
        }
    }
}

/// Trained weights plus frozen input scaling. Immutable once built.
///
/// Parameters are one flat vector: hidden weights (row-major, `hidden x inputs`),
/// hidden biases, output weights (`outputs x hidden`), output biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimator {
    pub(crate) kind: EstimatorKind,
    pub(crate) inputs: usize,
    pub(crate) hidden: usize,
    pub(crate) scaling: Vec<(f64, f64)>,
    pub(crate) horizon: Option<Horizon>,
    pub(crate) params: Vec<f64>,
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

/// Scratch buffers for one forward/backward pass.
struct Work {
    x: Vec<f64>,
    pre: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
    dh: Vec<f64>,
}

impl Estimator {
    /// Fresh network with seeded He-style initialization.
    pub fn init(
        kind: EstimatorKind,
        inputs: usize,
        hidden: usize,
        scaling: Vec<(f64, f64)>,
        seed: u64,
    ) -> Self {
        assert_eq!(scaling.len(), inputs);
        let outputs = kind.outputs();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w1 = Normal::new(0.0, (2.0 / inputs.max(1) as f64).sqrt()).expect("finite");
        let w2 = Normal::new(0.0, (1.0 / hidden.max(1) as f64).sqrt()).expect("finite");
        let mut params = Vec::with_capacity(hidden * inputs + hidden + outputs * hidden + outputs);
        params.extend((0..hidden * inputs).map(|_| w1.sample(&mut rng)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        params.extend((0..outputs * hidden).map(|_| w2.sample(&mut rng)));
        params.extend(std::iter::repeat_n(0.0, outputs));
        Self {
            kind,
            inputs,
            hidden,
            scaling,
            horizon: None,
            params,
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden
    }

    pub fn horizon(&self) -> Option<Horizon> {
        self.horizon
    }

    pub fn scaling(&self) -> &[(f64, f64)] {
        &self.scaling
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.kind.outputs() * self.hidden;
        (w1, b1, w2, b2)
    }

    fn work(&self) -> Work {
        Work {
            x: vec![0.0; self.inputs],
            pre: vec![0.0; self.hidden],
            h: vec![0.0; self.hidden],
            z: vec![0.0; self.kind.outputs()],
            dh: vec![0.0; self.hidden],
        }
    }

    /// Fills `w.z` with output logits (pre-activation).
    fn forward_into(&self, raw: &[f64], w: &mut Work) {
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        for (i, (x, (m, s))) in w.x.iter_mut().zip(&self.scaling).enumerate() {
            *x = (raw[i] - m) / s;
        }
        for j in 0..self.hidden {
            let row = &p[w1 + j * self.inputs..w1 + (j + 1) * self.inputs];
            let a = p[b1 + j] + row.iter().zip(&w.x).map(|(a, b)| a * b).sum::<f64>();
            w.pre[j] = a;
            w.h[j] = a.max(0.0);
        }
        for k in 0..w.z.len() {
            let row = &p[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
            w.z[k] = p[b2 + k] + row.iter().zip(&w.h).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Model output for one raw input vector.
    pub fn predict(&self, raw: &[f64]) -> Result<Prediction, EstimateError> {
        if raw.len() != self.inputs {
            return Err(EstimateError::SchemaMismatch {
                expected: self.inputs,
                found: raw.len(),
            });
        }
        let mut w = self.work();
        self.forward_into(raw, &mut w);
        Ok(match self.kind {
            EstimatorKind::Binary => Prediction::Probability(sigmoid(w.z[0])),
            EstimatorKind::Categorical(_) => {
                softmax_in_place(&mut w.z);
                Prediction::Distribution(w.z)
            }
            EstimatorKind::Regression => Prediction::Value(w.z[0]),
        })
    }

    /// Loss of one example given logits in `w.z`; overwrites `w.z` with dLoss/dz.
    fn loss_and_dz(&self, w: &mut Work, label: f64) -> f64 {
        match self.kind {
            EstimatorKind::Binary => {
                let z = w.z[0];
                w.z[0] = sigmoid(z) - label;
                softplus(z) - label * z
            }
            EstimatorKind::Categorical(_) => {
                let target = label as usize;
                let m = w.z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + w.z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                let loss = lse - w.z[target];
                softmax_in_place(&mut w.z);
                w.z[target] -= 1.0;
                loss
            }
            EstimatorKind::Regression => {
                let d = w.z[0] - label;
                w.z[0] = 2.0 * d;
                d * d
            }
        }
    }

    /// Adds the gradient of one example's loss to `grad`; returns the loss.
    fn accumulate(&self, raw: &[f64], label: f64, w: &mut Work, grad: &mut [f64]) -> f64 {
        self.forward_into(raw, w);
        let loss = self.loss_and_dz(w, label);
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        w.dh.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..w.z.len() {
            let dz = w.z[k];
            grad[b2 + k] += dz;
            let base = w2 + k * self.hidden;
            for j in 0..self.hidden {
                grad[base + j] += dz * w.h[j];
                w.dh[j] += dz * p[base + j];
            }
        }
        for j in 0..self.hidden {
            if w.pre[j] <= 0.0 {
                continue;
            }
            let d = w.dh[j];
            grad[b1 + j] += d;
            let base = w1 + j * self.inputs;
            for (g, x) in grad[base..base + self.inputs].iter_mut().zip(&w.x) {
                *g += d * x;
            }
        }
        loss
    }

    /// Mean loss and its gradient with respect to `params()` over the given rows.
    pub fn loss_and_gradient(&self, data: &TrainingDataset, rows: &[usize]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let mut w = self.work();
        let mut loss = 0.0;
        for &i in rows {
            loss += self.accumulate(data.inputs(i), data.label(i), &mut w, &mut grad);
        }
        let n = rows.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Mean loss over the whole dataset.
    pub fn loss(&self, data: &TrainingDataset) -> f64 {
        let mut w = self.work();
        let mut total = 0.0;
        for i in 0..data.len() {
            self.forward_into(data.inputs(i), &mut w);
            total += self.loss_and_dz(&mut w, data.label(i));
        }
        total / data.len().max(1) as f64
    }

    /// Fraction of examples whose predicted class equals the label.
    pub fn accuracy(&self, data: &TrainingDataset) -> f64 {
        let hits = (0..data.len())
            .filter(|&i| {
                self.predict(data.inputs(i))
                    .ok()
                    .and_then(|p| p.class())
                    .is_some_and(|c| c as f64 == data.label(i))
            })
            .count();
        hits as f64 / data.len().max(1) as f64
    }

    /// Output biases start at the label prior: log-odds of the positive rate,
    /// log class frequencies, or the mean target. Rates are clamped to
    /// [0.01, 0.99] so single-class data stays finite.
    fn set_prior_bias(&mut self, data: &TrainingDataset) {
        let (_, _, _, b2) = self.offsets();
        let n = data.len().max(1) as f64;
        let labels = data.labels();
        match self.kind {
            EstimatorKind::Binary => {
                let rate = (labels.iter().sum::<f64>() / n).clamp(0.01, 0.99);
                self.params[b2] = (rate / (1.0 - rate)).ln();
            }
            EstimatorKind::Categorical(k) => {
                for c in 0..k {
                    let count = labels.iter().filter(|&&l| l as usize == c).count() as f64;
                    self.params[b2 + c] = (count / n).clamp(0.01, 0.99).ln();
                }
            }
            EstimatorKind::Regression => {
                self.params[b2] = labels.iter().sum::<f64>() / n;
            }
        }
    }

    fn descend(&mut self, data: &TrainingDataset, hp: &Hyperparams) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x005e_ed0f_7a1e);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut grad = vec![0.0; self.params.len()];
        let mut w = self.work();
        let batch = hp.batch_size.max(1);
        let mut losses = Vec::with_capacity(hp.epochs);
        for _ in 0..hp.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in chunk {
                    epoch_loss += self.accumulate(data.inputs(i), data.label(i), &mut w, &mut grad);
                }
                let step = hp.learning_rate / chunk.len() as f64;
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= step * g;
                }
            }
            losses.push(epoch_loss / data.len().max(1) as f64);
        }
        losses
    }
}

fn check_labels(kind: EstimatorKind, data: &TrainingDataset) -> Result<bool, EstimateError> {
    match kind {
        EstimatorKind::Binary => {
            if let Some(&bad) = data.labels().iter().find(|&&l| l != 0.0 && l != 1.0) {
                return Err(EstimateError::InvalidLabel(bad));
            }
            let ones = data.labels().iter().filter(|&&l| l == 1.0).count();
            Ok(ones == 0 || ones == data.len())
        }
        EstimatorKind::Categorical(k) => {
            if let Some(&bad) = data
                .labels()
                .iter()
                .find(|&&l| l < 0.0 || l.fract() != 0.0 || l as usize >= k)
            {
                return Err(EstimateError::InvalidLabel(bad));
            }
            Ok(false)
        }
        EstimatorKind::Regression => {
            if let Some(&bad) = data.labels().iter().find(|l| !l.is_finite()) {
                return Err(EstimateError::InvalidLabel(bad));
            }
            Ok(false)
        }
    }
}

fn scaling_for(spec: &TrainSpec, data: &TrainingDataset) -> Vec<(f64, f64)> {
    let n = data.len() as f64;
    (0..data.n_features())
        .map(|f| {
            if !spec.standardize.get(f).copied().unwrap_or(false) {
                return (0.0, 1.0);
            }
            let mean = (0..data.len()).map(|i| data.inputs(i)[f]).sum::<f64>() / n;
            let var = (0..data.len())
                .map(|i| (data.inputs(i)[f] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        })
        .collect()
}

/// Fits a new estimator to `data`. Deterministic for a given (data order, seed).
pub fn train(
    data: &TrainingDataset,
    spec: &TrainSpec,
    hp: &Hyperparams,
) -> Result<(Estimator, TrainReport), EstimateError> {
    if data.is_empty() {
        return Err(EstimateError::EmptyDataset);
    }
    if spec.standardize.len() != data.n_features() {
        return Err(EstimateError::SchemaMismatch {
            expected: spec.standardize.len(),
            found: data.n_features(),
        });
    }
    let degenerate = check_labels(spec.kind, data)?;
    if degenerate {
        log::warn!("training `{}` on single-class labels", data.estimate);
    }
    let mut est = Estimator::init(
        spec.kind,
        data.n_features(),
        hp.hidden,
        scaling_for(spec, data),
        hp.seed,
    );
    est.horizon = spec.horizon;
    est.set_prior_bias(data);
    let epoch_losses = est.descend(data, hp);
    Ok((
        est,
        TrainReport {
            examples: data.len(),
            epoch_losses,
            degenerate_labels: degenerate,
        },
    ))
}

/// Continues training from the current weights over `data`, which callers
/// pass as the union of previously used and new examples. With
/// `full_retrain` the network is re-initialized first; scaling stays frozen.
pub fn update(
    model: &Estimator,
    data: &TrainingDataset,
    hp: &Hyperparams,
) -> Result<(Estimator, TrainReport), EstimateError> {
    if data.n_features() != model.inputs {
        return Err(EstimateError::SchemaMismatch {
            expected: model.inputs,
            found: data.n_features(),
        });
    }
    let degenerate = check_labels(model.kind, data)? && !data.is_empty();
    let mut est = if hp.full_retrain {
        let mut fresh = Estimator::init(
            model.kind,
            model.inputs,
            model.hidden,
            model.scaling.clone(),
            hp.seed,
        );
        fresh.horizon = model.horizon;
        fresh
    } else {
        model.clone()
    };
    let epoch_losses = est.descend(data, hp);
    Ok((
        est,
        TrainReport {
            examples: data.len(),
            epoch_losses,
            degenerate_labels: degenerate,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[(&[f64], f64)]) -> TrainingDataset {
        let mut ds = TrainingDataset::new("t", rows[0].0.len());
        for (x, y) in rows {
            ds.push(1, x, *y).unwrap();
        }
        ds
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let ds = TrainingDataset::new("t", 2);
        let spec = TrainSpec::plain(EstimatorKind::Binary, 2);
        assert_eq!(
            train(&ds, &spec, &Hyperparams::default()).unwrap_err(),
            EstimateError::EmptyDataset
        );
    }

    #[test]
    fn constant_label_is_fitted_and_flagged() {
        let rows: Vec<(Vec<f64>, f64)> =
            (0..40).map(|i| (vec![i as f64 / 40.0, 1.0], 1.0)).collect();
        let refs: Vec<(&[f64], f64)> = rows.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let ds = dataset(&refs);
        let hp = Hyperparams {
            epochs: 200,
            learning_rate: 0.1,
            ..Hyperparams::default()
        };
        let (est, report) = train(&ds, &TrainSpec::plain(EstimatorKind::Binary, 2), &hp).unwrap();
        assert!(report.degenerate_labels);
        for i in 0..ds.len() {
            assert!(est.predict(ds.inputs(i)).unwrap().probability().unwrap() >= 0.9);
        }
    }

    #[test]
    fn categorical_outputs_are_normalized() {
        let est = Estimator::init(EstimatorKind::Categorical(4), 3, 16, vec![(0.0, 1.0); 3], 9);
        let Prediction::Distribution(d) = est.predict(&[0.3, -2.0, 5.0]).unwrap() else {
            panic!("categorical prediction");
        };
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_labels_are_rejected() {
        let ds = dataset(&[(&[0.0], 0.5)]);
        assert!(matches!(
            train(
                &ds,
                &TrainSpec::plain(EstimatorKind::Binary, 1),
                &Hyperparams::default()
            ),
            Err(EstimateError::InvalidLabel(_))
        ));
        let ds = dataset(&[(&[0.0], 3.0)]);
        assert!(train(
            &ds,
            &TrainSpec::plain(EstimatorKind::Categorical(3), 1),
            &Hyperparams::default()
        )
        .is_err());
    }

    #[test]
    fn zero_epoch_update_is_a_no_op() {
        let ds = dataset(&[(&[0.0, 1.0], 1.0), (&[1.0, 0.0], 0.0)]);
        let (est, _) = train(
            &ds,
            &TrainSpec::plain(EstimatorKind::Binary, 2),
            &Hyperparams::default(),
        )
        .unwrap();
        let empty = TrainingDataset::new("t", 2);
        let hp = Hyperparams {
            epochs: 0,
            ..Hyperparams::default()
        };
        let (same, _) = update(&est, &empty, &hp).unwrap();
        assert_eq!(same, est);
        assert!(update(&est, &TrainingDataset::new("t", 3), &hp).is_err());
    }
}
