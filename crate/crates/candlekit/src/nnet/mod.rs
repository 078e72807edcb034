//! Minimal differentiable-layer engine: dense, causal 4 x m convolution,
//! ReLU, inverted dropout and a softmax head trained with mean categorical
//! cross-entropy.
//!
//! Everything is 64-bit and deterministic: initialization, data order and
//! dropout masks derive from explicit seeds, batches are processed
//! sequentially, and summation order is fixed, so a (seed, data, config)
//! triple fully determines the trained parameters.

mod layers;
pub mod serialize;
mod tensor;

use rand_chacha::ChaCha12Rng;
use thiserror::Error;

pub use layers::{LayerSpec, CANDLE_ROWS};
pub use serialize::{load_model, save_model, ModelFile, MODEL_FILE_VERSION};
pub use tensor::Tensor;

use crate::market::Class;
use crate::num::rng_from;
use layers::Layer;

/// Stream tags keeping the init and training RNG streams apart.
const INIT_STREAM: u64 = 0x696e_6974;
const TRAIN_STREAM: u64 = 0x7472_6169;

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite activation in layer {layer} ({kind})")]
    NonFinite { layer: usize, kind: &'static str },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("model file error: {0}")]
    ModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// An ordered stack of layers with parameters, gradients and the seed that
/// initialized it.
#[derive(Clone, Debug)]
pub struct Network {
    input_dim: usize,
    output_dim: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    seed: u64,
}

impl Network {
    /// Build a network from layer specs, validating that shapes chain, and
    /// initialize parameters from `seed`.
    pub fn new(input_dim: usize, specs: Vec<LayerSpec>, seed: u64) -> Result<Self, NnetError> {
        if specs.is_empty() {
            return Err(NnetError::Parameter(
                "network needs at least one layer".into(),
            ));
        }
        let mut dim = input_dim;
        for (i, spec) in specs.iter().enumerate() {
            dim = spec
                .output_dim(dim)
                .map_err(|e| NnetError::Shape(format!("layer {i}: {e}")))?;
        }
        let mut rng = rng_from(&[seed, INIT_STREAM]);
        let layers = specs
            .iter()
            .map(|s| Layer::from_spec(s, &mut rng))
            .collect();
        Ok(Self {
            input_dim,
            output_dim: dim,
            specs,
            layers,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.specs.iter().map(LayerSpec::param_count).sum()
    }

    /// Weights of the first convolution layer as (filters, width), with
    /// each filter a row-major 4 x width matrix, or None for dense models.
    pub fn conv_filters(&self) -> Option<(Vec<Vec<f64>>, usize)> {
        self.layers.iter().find_map(|layer| match layer {
            Layer::Conv(c) => {
                let per = CANDLE_ROWS * c.width;
                let filters = (0..c.filters)
                    .map(|f| c.w[f * per..(f + 1) * per].to_vec())
                    .collect();
                Some((filters, c.width))
            }
            _ => None,
        })
    }

    fn check_batch(&self, batch: &Tensor) -> Result<(), NnetError> {
        if batch.shape().len() != 2 || batch.cols() != self.input_dim {
            return Err(NnetError::Shape(format!(
                "batch shape {:?} does not match input dim {}",
                batch.shape(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Deterministic forward pass in predict mode (dropout is identity
    /// under inverted dropout); rows of the output sum to one.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor, NnetError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.predict(&x);
            if !x.is_finite() {
                return Err(NnetError::NonFinite {
                    layer: i,
                    kind: self.specs[i].kind_name(),
                });
            }
        }
        Ok(x)
    }

    /// Training-mode forward: caches activations and samples fresh dropout
    /// masks from `rng`.
    pub fn forward_train(
        &mut self,
        batch: &Tensor,
        rng: &mut ChaCha12Rng,
    ) -> Result<Tensor, NnetError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for i in 0..self.layers.len() {
            x = self.layers[i].forward_train(&x, rng);
            if !x.is_finite() {
                return Err(NnetError::NonFinite {
                    layer: i,
                    kind: self.specs[i].kind_name(),
                });
            }
        }
        Ok(x)
    }

    /// Forward pass reusing the dropout masks sampled by the last
    /// training-mode forward, for finite-difference gradient checks.
    pub fn forward_frozen(&self, batch: &Tensor) -> Result<Tensor, NnetError> {
        self.check_batch(batch)?;
        for layer in &self.layers {
            if let Some(len) = layer.dropout_mask_len() {
                if len == 0 {
                    return Err(NnetError::Parameter(
                        "no dropout masks recorded; run a training forward first".into(),
                    ));
                }
            }
        }
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward_frozen(&x);
        }
        Ok(x)
    }

    /// Mean categorical cross-entropy of probability rows against labels.
    pub fn cross_entropy(probs: &Tensor, labels: &[Class]) -> f64 {
        let rows = probs.rows();
        debug_assert_eq!(rows, labels.len());
        let mut loss = 0.0;
        for (b, label) in labels.iter().enumerate() {
            let p = probs.row(b)[class_index(*label)];
            loss -= p.max(1e-300).ln();
        }
        loss / rows as f64
    }

    /// Loss under frozen dropout masks; the finite-difference oracle
    /// perturbs parameters around this function.
    pub fn loss_frozen(&self, batch: &Tensor, labels: &[Class]) -> Result<f64, NnetError> {
        let probs = self.forward_frozen(batch)?;
        Ok(Self::cross_entropy(&probs, labels))
    }

    /// One training-mode forward/backward pass: returns the batch loss and
    /// leaves gradients of the mean cross-entropy in the layers.
    pub fn train_step(
        &mut self,
        batch: &Tensor,
        labels: &[Class],
        rng: &mut ChaCha12Rng,
    ) -> Result<f64, NnetError> {
        if labels.len() != batch.rows() {
            return Err(NnetError::Shape(format!(
                "{} labels for a batch of {}",
                labels.len(),
                batch.rows()
            )));
        }
        if self.output_dim != 2 {
            return Err(NnetError::Shape("training expects a 2-class head".into()));
        }
        if !matches!(self.specs.last(), Some(LayerSpec::Softmax)) {
            return Err(NnetError::Parameter(
                "training requires a softmax output layer".into(),
            ));
        }
        let probs = self.forward_train(batch, rng)?;
        let loss = Self::cross_entropy(&probs, labels);
        self.backward(labels)?;
        Ok(loss)
    }

    /// Backpropagate from the cached softmax output. The softmax and the
    /// cross-entropy loss are fused: the gradient at the softmax input is
    /// (p - onehot) / batch.
    fn backward(&mut self, labels: &[Class]) -> Result<(), NnetError> {
        let (probs, rows) = self
            .layers
            .last()
            .and_then(Layer::cached_softmax_output)
            .ok_or_else(|| NnetError::Parameter("no cached forward pass".into()))?;
        let cols = self.output_dim;
        let inv_b = 1.0 / rows as f64;
        let mut grad = vec![0.0; rows * cols];
        for (b, label) in labels.iter().enumerate() {
            for c in 0..cols {
                let y = if c == class_index(*label) { 1.0 } else { 0.0 };
                grad[b * cols + c] = (probs[b * cols + c] - y) * inv_b;
            }
        }
        let mut grad = Tensor::from_parts(vec![rows, cols], grad);
        for layer in self.layers.iter_mut().rev().skip(1) {
            grad = layer.backward(&grad);
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grads);
    }

    /// All parameters flattened in layer order, weights before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            let (w, b) = layer.params();
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), NnetError> {
        if params.len() != self.param_count() {
            return Err(NnetError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let (w, b) = layer.params_mut();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            b.copy_from_slice(&params[offset..offset + b.len()]);
            offset += b.len();
        }
        Ok(())
    }

    /// All gradients flattened in the same order as `params_flat`.
    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            let (gw, gb) = layer.grads();
            out.extend_from_slice(gw);
            out.extend_from_slice(gb);
        }
        out
    }
}

/// Column index of a class in probability rows: [p_negative, p_positive].
pub fn class_index(class: Class) -> usize {
    match class {
        Class::Negative => 0,
        Class::Positive => 1,
    }
}

/// Class of a probability row, ties resolved toward the positive class.
pub fn class_of_row(row: &[f64]) -> Class {
    if row[1] >= row[0] {
        Class::Positive
    } else {
        Class::Negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Sgd,
    SgdMomentum,
    Adam,
}

impl Optimizer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::SgdMomentum => "sgd-momentum",
            Optimizer::Adam => "adam",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "sgd-momentum" => Ok(Optimizer::SgdMomentum),
            "adam" => Ok(Optimizer::Adam),
            other => Err(format!("unknown optimizer `{other}`")),
        }
    }
}

/// Training hyperparameters. The epoch count is a fixed budget; there is
/// no implicit early stopping.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-2,
            optimizer: Optimizer::SgdMomentum,
            seed: 0,
            shuffle: true,
        }
    }
}

const MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Per-epoch training metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
}

struct OptimizerState {
    velocity: Vec<f64>,
    second: Vec<f64>,
    step: u64,
}

fn apply_update(
    params: &mut [f64],
    grads: &[f64],
    config: &TrainConfig,
    state: &mut OptimizerState,
) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        Optimizer::SgdMomentum => {
            for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut state.velocity) {
                *v = MOMENTUM * *v + g;
                *p -= lr * *v;
            }
        }
        Optimizer::Adam => {
            state.step += 1;
            let t = state.step as f64;
            let bc1 = 1.0 - ADAM_BETA1.powf(t);
            let bc2 = 1.0 - ADAM_BETA2.powf(t);
            for ((p, g), (v, s)) in params
                .iter_mut()
                .zip(grads)
                .zip(state.velocity.iter_mut().zip(&mut state.second))
            {
                *v = ADAM_BETA1 * *v + (1.0 - ADAM_BETA1) * g;
                *s = ADAM_BETA2 * *s + (1.0 - ADAM_BETA2) * g * g;
                *p -= lr * (*v / bc1) / ((*s / bc2).sqrt() + ADAM_EPS);
            }
        }
    }
}

/// Gather rows `idx` of a dataset into a batch tensor plus labels.
fn gather(inputs: &Tensor, labels: &[Class], idx: &[usize]) -> (Tensor, Vec<Class>) {
    let cols = inputs.cols();
    let mut data = Vec::with_capacity(idx.len() * cols);
    let mut lab = Vec::with_capacity(idx.len());
    for &i in idx {
        data.extend_from_slice(inputs.row(i));
        lab.push(labels[i]);
    }
    (Tensor::from_parts(vec![idx.len(), cols], data), lab)
}

/// Predicted classes in predict mode.
pub fn predict_classes(net: &Network, inputs: &Tensor) -> Result<Vec<Class>, NnetError> {
    let probs = net.predict(inputs)?;
    Ok((0..probs.rows())
        .map(|b| class_of_row(probs.row(b)))
        .collect())
}

/// Train for exactly `config.epochs` epochs of mini-batch gradient
/// descent, recording per-epoch mean loss and training accuracy.
pub fn train(
    net: &mut Network,
    inputs: &Tensor,
    labels: &[Class],
    config: &TrainConfig,
) -> Result<TrainReport, NnetError> {
    train_with(net, inputs, labels, config, |_, _| Ok(()))
}

/// As [`train`], invoking `on_epoch` with the network and that epoch's
/// metrics after every epoch (for test-curve tracking and checkpoints).
pub fn train_with<F>(
    net: &mut Network,
    inputs: &Tensor,
    labels: &[Class],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport, NnetError>
where
    F: FnMut(&Network, &EpochMetrics) -> Result<(), NnetError>,
{
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(NnetError::Parameter(
            "epochs and batch size must be >= 1".into(),
        ));
    }
    if config.learning_rate <= 0.0 || config.learning_rate.is_nan() {
        return Err(NnetError::Parameter(
            "learning rate must be positive".into(),
        ));
    }
    if inputs.rows() == 0 {
        return Err(NnetError::Parameter("empty training set".into()));
    }
    if labels.len() != inputs.rows() {
        return Err(NnetError::Shape(format!(
            "{} labels for {} samples",
            labels.len(),
            inputs.rows()
        )));
    }
    let n = inputs.rows();
    let pc = net.param_count();
    let mut state = OptimizerState {
        velocity: vec![0.0; pc],
        second: vec![0.0; pc],
        step: 0,
    };
    let mut rng = rng_from(&[config.seed, TRAIN_STREAM]);
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport::default();
    let mut params = net.params_flat();

    for epoch in 0..config.epochs {
        if config.shuffle {
            // Fisher-Yates driven by the training stream.
            use rand::Rng;
            for i in (1..n).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (batch, batch_labels) = gather(inputs, labels, chunk);
            net.zero_grads();
            let loss = net
                .train_step(&batch, &batch_labels, &mut rng)
                .map_err(|e| {
                    if matches!(e, NnetError::NonFinite { .. }) {
                        NnetError::Diverged { epoch }
                    } else {
                        e
                    }
                })?;
            if !loss.is_finite() {
                return Err(NnetError::Diverged { epoch });
            }
            loss_sum += loss * chunk.len() as f64;
            let grads = net.grads_flat();
            apply_update(&mut params, &grads, config, &mut state);
            net.set_params_flat(&params)?;
        }
        let predictions = predict_classes(net, inputs)?;
        let hits = predictions
            .iter()
            .zip(labels)
            .filter(|(a, b)| a == b)
            .count();
        let metrics = EpochMetrics {
            epoch: epoch + 1,
            mean_loss: loss_sum / n as f64,
            train_accuracy: hits as f64 / n as f64,
        };
        on_epoch(net, &metrics)?;
        report.epochs.push(metrics);
    }
    Ok(report)
}
