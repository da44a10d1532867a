//! Cross-entropy backpropagation, mini-batch SGD, and key finetuning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::model::{argmax, check_domain, softmax, MlpModel};
use crate::{Error, Result, Scalar};

/// Probabilities are clamped to this before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Key accuracy at which watermark finetuning stops.
pub const KEY_ACCURACY_TARGET: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::param(format!(
                "learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::param(format!(
                "batch_size must be in 1..={n}, got {}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Parameter gradients laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub bias: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    fn zeros_like(model: &MlpModel<T>) -> Self {
        Gradients {
            weights: model.layers().iter().map(|l| vec![T::zero(); l.weights().len()]).collect(),
            bias: model.layers().iter().map(|l| vec![T::zero(); l.bias().len()]).collect(),
        }
    }

    /// Flattened in the order of [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<T> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    fn scale(&mut self, s: T) {
        for v in self.weights.iter_mut().chain(self.bias.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }
}

impl<T: Scalar> MlpModel<T> {
    /// All parameters, layer by layer, weights (row-major) before bias.
    pub fn parameters(&self) -> Vec<T> {
        self.layers()
            .iter()
            .flat_map(|l| l.weights().iter().chain(l.bias()).copied())
            .collect()
    }

    /// Copy of the model with parameters replaced, in [`parameters`](Self::parameters) order.
    pub fn with_parameters(&self, params: &[T]) -> Result<Self> {
        if params.len() != self.num_parameters() {
            return Err(Error::param(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        let mut out = self.clone();
        let mut rest = params;
        for layer in out.layers_mut() {
            let (w, tail) = rest.split_at(layer.weights().len());
            layer.weights_mut().copy_from_slice(w);
            let (b, tail) = tail.split_at(layer.bias().len());
            layer.bias_mut().copy_from_slice(b);
            rest = tail;
        }
        Ok(out)
    }

    fn sgd_step(&mut self, grads: &Gradients<T>, lr: T) {
        for (l, layer) in self.layers_mut().iter_mut().enumerate() {
            for (w, &g) in layer.weights_mut().iter_mut().zip(&grads.weights[l]) {
                *w -= lr * g;
            }
            for (b, &g) in layer.bias_mut().iter_mut().zip(&grads.bias[l]) {
                *b -= lr * g;
            }
        }
    }
}

fn check_example<T: Scalar>(model: &MlpModel<T>, x: &[T], label: usize) -> Result<()> {
    if x.len() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            actual: x.len(),
        });
    }
    check_domain(x)?;
    if label >= model.num_classes() {
        return Err(Error::Data(format!(
            "label {label} out of range for {} classes",
            model.num_classes()
        )));
    }
    Ok(())
}

/// Backprop of one example. Accumulates parameter gradients into `grads`
/// when given and returns `(loss, d loss / d input)`.
fn backprop<T: Scalar>(
    model: &MlpModel<T>,
    x: &[T],
    label: usize,
    mut grads: Option<&mut Gradients<T>>,
) -> (T, Vec<T>) {
    let trace = model.trace(x);
    let logits = &trace.post[trace.post.len() - 1];
    let p = softmax(logits);
    let floor = T::lit(PROB_FLOOR);
    let loss = -p[label].max(floor).ln();

    // d loss / d logits; zero once the clamp is active.
    let mut upstream: Vec<T> = if p[label] >= floor {
        p.iter()
            .enumerate()
            .map(|(j, &pj)| if j == label { pj - T::one() } else { pj })
            .collect()
    } else {
        vec![T::zero(); p.len()]
    };

    for (l, layer) in model.layers().iter().enumerate().rev() {
        let act = layer.activation();
        let dz: Vec<T> = upstream
            .iter()
            .zip(trace.pre[l].iter().zip(&trace.post[l + 1]))
            .map(|(&g, (&z, &a))| g * act.derivative(z, a))
            .collect();
        let input = &trace.post[l];
        if let Some(g) = grads.as_deref_mut() {
            let n_in = layer.in_dim();
            for (row, &dzi) in dz.iter().enumerate() {
                let gw = &mut g.weights[l][row * n_in..(row + 1) * n_in];
                for (gwj, &aj) in gw.iter_mut().zip(input) {
                    *gwj += dzi * aj;
                }
                g.bias[l][row] += dzi;
            }
        }
        let mut down = vec![T::zero(); layer.in_dim()];
        for (row, &dzi) in layer.rows().zip(&dz) {
            for (dj, &w) in down.iter_mut().zip(row) {
                *dj += w * dzi;
            }
        }
        upstream = down;
    }
    (loss, upstream)
}

/// Mean natural-log cross-entropy over the batch and its parameter gradient.
pub fn loss_and_gradient<T: Scalar, X: AsRef<[T]>>(
    model: &MlpModel<T>,
    inputs: &[X],
    labels: &[usize],
) -> Result<(T, Gradients<T>)> {
    if inputs.is_empty() {
        return Err(Error::Data("batch is empty".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Data(format!(
            "{} inputs but {} labels",
            inputs.len(),
            labels.len()
        )));
    }
    for (x, &y) in inputs.iter().zip(labels) {
        check_example(model, x.as_ref(), y)?;
    }
    Ok(batch_gradient(model, inputs, labels))
}

fn batch_gradient<T: Scalar, X: AsRef<[T]>>(
    model: &MlpModel<T>,
    inputs: &[X],
    labels: &[usize],
) -> (T, Gradients<T>) {
    let mut grads = Gradients::zeros_like(model);
    let mut loss = T::zero();
    for (x, &y) in inputs.iter().zip(labels) {
        loss += backprop(model, x.as_ref(), y, Some(&mut grads)).0;
    }
    let inv = T::one() / T::from_usize(inputs.len()).expect("batch size fits scalar");
    grads.scale(inv);
    (loss * inv, grads)
}

/// Gradient of the cross-entropy at `label` with respect to the input.
pub fn input_gradient<T: Scalar>(model: &MlpModel<T>, x: &[T], label: usize) -> Result<Vec<T>> {
    check_example(model, x, label)?;
    Ok(backprop(model, x, label, None).1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Scalar> {
    pub model: MlpModel<T>,
    pub history: Vec<EpochRecord>,
}

impl<T: Scalar> TrainOutcome<T> {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy\n");
        for r in &self.history {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.accuracy));
        }
        s
    }
}

pub fn accuracy<T: Scalar, X: AsRef<[T]>>(model: &MlpModel<T>, inputs: &[X], labels: &[usize]) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    let hits = inputs
        .iter()
        .zip(labels)
        .filter(|(x, &y)| argmax(&model.logits_unchecked(x.as_ref())) == y)
        .count();
    hits as f64 / inputs.len() as f64
}

/// One shuffled pass of mini-batch SGD; returns the mean per-example loss.
fn sgd_epoch<T: Scalar>(
    model: &mut MlpModel<T>,
    inputs: &[&[T]],
    labels: &[usize],
    batch_size: usize,
    lr: T,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        let xs: Vec<&[T]> = batch.iter().map(|&i| inputs[i]).collect();
        let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
        let (loss, grads) = batch_gradient(model, &xs, &ys);
        if !loss.is_finite() {
            return Err(Error::Numeric("training loss became non-finite".into()));
        }
        total += loss.as_f64() * batch.len() as f64;
        model.sgd_step(&grads, lr);
    }
    Ok(total / inputs.len() as f64)
}

fn check_dataset<T: Scalar>(model: &MlpModel<T>, data: &LabeledDataset<T>) -> Result<()> {
    if data.dim() != model.input_dim() {
        return Err(Error::InputShape {
            expected: model.input_dim(),
            actual: data.dim(),
        });
    }
    if data.num_classes() > model.num_classes() {
        return Err(Error::Data(format!(
            "dataset has {} classes but the model outputs {}",
            data.num_classes(),
            model.num_classes()
        )));
    }
    Ok(())
}

/// Mini-batch SGD on `data`. Shuffle order is derived from `config.seed`.
pub fn train<T: Scalar>(
    model: &MlpModel<T>,
    data: &LabeledDataset<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if data.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    check_dataset(model, data)?;
    config.validate(data.len())?;
    let inputs: Vec<&[T]> = data.iter_inputs().collect();
    let labels = data.labels();
    let lr = T::lit(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model.clone();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let loss = sgd_epoch(&mut model, &inputs, labels, config.batch_size, lr, &mut rng)?;
        history.push(EpochRecord {
            epoch,
            loss,
            accuracy: accuracy(&model, &inputs, labels),
        });
    }
    Ok(TrainOutcome { model, history })
}

/// Inputs paired with the labels a watermarked model must assign them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WatermarkKey<T: Scalar> {
    pub inputs: Vec<Vec<T>>,
    pub target_labels: Vec<usize>,
}

impl<T: Scalar> WatermarkKey<T> {
    pub fn new(inputs: Vec<Vec<T>>, target_labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != target_labels.len() {
            return Err(Error::Data(format!(
                "{} key inputs but {} target labels",
                inputs.len(),
                target_labels.len()
            )));
        }
        for x in &inputs {
            check_domain(x)?;
        }
        Ok(WatermarkKey {
            inputs,
            target_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn accuracy(&self, model: &MlpModel<T>) -> f64 {
        accuracy(model, &self.inputs, &self.target_labels)
    }
}

#[derive(Debug, Clone)]
pub struct WatermarkOutcome<T: Scalar> {
    pub model: MlpModel<T>,
    pub key_accuracy: f64,
    pub epochs_run: usize,
    pub reached_target: bool,
    pub history: Vec<EpochRecord>,
}

/// Finetunes a copy of `model` on the key alone until at least
/// [`KEY_ACCURACY_TARGET`] of the key is classified as its target labels or
/// `config.epochs` run out. Missing the target is reported, not an error.
/// The batch size is capped at the key size.
pub fn watermark_finetune<T: Scalar>(
    model: &MlpModel<T>,
    key: &WatermarkKey<T>,
    config: &TrainConfig,
) -> Result<WatermarkOutcome<T>> {
    if key.is_empty() {
        return Err(Error::Data("watermark key is empty".into()));
    }
    for (x, &y) in key.inputs.iter().zip(&key.target_labels) {
        check_example(model, x, y)?;
    }
    let config = TrainConfig {
        batch_size: config.batch_size.min(key.len()),
        ..*config
    };
    config.validate(key.len())?;
    let inputs: Vec<&[T]> = key.inputs.iter().map(Vec::as_slice).collect();
    let lr = T::lit(config.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = model.clone();
    let mut history = Vec::new();
    let mut key_accuracy = key.accuracy(&model);
    while key_accuracy < KEY_ACCURACY_TARGET && history.len() < config.epochs {
        let loss = sgd_epoch(&mut model, &inputs, &key.target_labels, config.batch_size, lr, &mut rng)?;
        key_accuracy = key.accuracy(&model);
        history.push(EpochRecord {
            epoch: history.len() + 1,
            loss,
            accuracy: key_accuracy,
        });
    }
    Ok(WatermarkOutcome {
        model,
        key_accuracy,
        epochs_run: history.len(),
        reached_target: key_accuracy >= KEY_ACCURACY_TARGET,
        history,
    })
}
