//! Layer implementations. Every layer operates on 2-D batches
//! [samples, features] with fixed sequential summation order, so results
//! are bit-stable across runs.
//!
//! Convolution interprets its input row as a 4 x W candle matrix
//! (row-major, rows open/close/low/high) and applies causal left zero
//! padding of width-1 columns, so each output column only sees current and
//! past days and the output width equals the input width.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;

/// Candle matrix height shared by windows, templates and filters.
pub const CANDLE_ROWS: usize = 4;

/// Declarative layer description; the serialized model format stores these.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        units: usize,
    },
    /// `filters` kernels of shape 4 x `width` over a 4 x `input_width`
    /// matrix; output is the flattened [filters x input_width] map.
    Conv {
        filters: usize,
        width: usize,
        input_width: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Softmax,
}

impl LayerSpec {
    /// Output feature count given the input feature count, or an error
    /// message when the shapes do not chain.
    pub fn output_dim(&self, input_dim: usize) -> Result<usize, String> {
        match *self {
            LayerSpec::Dense { inputs, units } => {
                if inputs != input_dim {
                    Err(format!("dense expects {inputs} inputs, got {input_dim}"))
                } else {
                    Ok(units)
                }
            }
            LayerSpec::Conv {
                filters,
                width,
                input_width,
            } => {
                if input_dim != CANDLE_ROWS * input_width {
                    Err(format!(
                        "conv expects {} inputs (4 x {input_width}), got {input_dim}",
                        CANDLE_ROWS * input_width
                    ))
                } else if width == 0 || width > input_width || filters == 0 {
                    Err(format!("bad conv geometry {filters} x 4 x {width}"))
                } else {
                    Ok(filters * input_width)
                }
            }
            LayerSpec::Relu | LayerSpec::Softmax => Ok(input_dim),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(&rate) {
                    Err(format!("dropout rate {rate} outside [0, 1)"))
                } else {
                    Ok(input_dim)
                }
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, units } => inputs * units + units,
            LayerSpec::Conv { filters, width, .. } => filters * (CANDLE_ROWS * width + 1),
            _ => 0,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::Softmax => "softmax",
        }
    }
}

#[derive(Clone, Debug)]
pub(super) struct DenseState {
    pub inputs: usize,
    pub units: usize,
    pub w: Vec<f64>, // [inputs][units] row-major
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
    cached_input: Vec<f64>,
    cached_rows: usize,
}

#[derive(Clone, Debug)]
pub(super) struct ConvState {
    pub filters: usize,
    pub width: usize,
    pub input_width: usize,
    pub w: Vec<f64>, // [filter][row][col] row-major
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
    cached_input: Vec<f64>,
    cached_rows: usize,
}

#[derive(Clone, Debug, Default)]
pub(super) struct ReluState {
    cached_input: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(super) struct DropoutState {
    pub rate: f64,
    /// Per-entry scale of the last train-mode forward: 0 or 1/(1-rate).
    mask: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub(super) struct SoftmaxState {
    cached_output: Vec<f64>,
    cached_rows: usize,
}

#[derive(Clone, Debug)]
pub(super) enum Layer {
    Dense(DenseState),
    Conv(ConvState),
    Relu(ReluState),
    Dropout(DropoutState),
    Softmax(SoftmaxState),
}

/// Scaled-uniform fan-in init suited to ReLU stacks.
fn init_uniform(rng: &mut ChaCha12Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// Biases draw from the narrower 1/sqrt(fan_in) band. Keeping them off
/// zero also keeps ReLU preactivations away from the exact kink when
/// dropout zeroes an entire input row.
fn init_bias(rng: &mut ChaCha12Rng, fan_in: usize, n: usize) -> Vec<f64> {
    let limit = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl Layer {
    pub fn from_spec(spec: &LayerSpec, rng: &mut ChaCha12Rng) -> Self {
        match *spec {
            LayerSpec::Dense { inputs, units } => Layer::Dense(DenseState {
                inputs,
                units,
                w: init_uniform(rng, inputs, inputs * units),
                b: init_bias(rng, inputs, units),
                gw: vec![0.0; inputs * units],
                gb: vec![0.0; units],
                cached_input: Vec::new(),
                cached_rows: 0,
            }),
            LayerSpec::Conv {
                filters,
                width,
                input_width,
            } => Layer::Conv(ConvState {
                filters,
                width,
                input_width,
                w: init_uniform(rng, CANDLE_ROWS * width, filters * CANDLE_ROWS * width),
                b: init_bias(rng, CANDLE_ROWS * width, filters),
                gw: vec![0.0; filters * CANDLE_ROWS * width],
                gb: vec![0.0; filters],
                cached_input: Vec::new(),
                cached_rows: 0,
            }),
            LayerSpec::Relu => Layer::Relu(ReluState::default()),
            LayerSpec::Dropout { rate } => Layer::Dropout(DropoutState {
                rate,
                mask: Vec::new(),
            }),
            LayerSpec::Softmax => Layer::Softmax(SoftmaxState::default()),
        }
    }

    pub fn params(&self) -> (&[f64], &[f64]) {
        match self {
            Layer::Dense(d) => (&d.w, &d.b),
            Layer::Conv(c) => (&c.w, &c.b),
            _ => (&[], &[]),
        }
    }

    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        match self {
            Layer::Dense(d) => (&mut d.w, &mut d.b),
            Layer::Conv(c) => (&mut c.w, &mut c.b),
            _ => (&mut [], &mut []),
        }
    }

    pub fn grads(&self) -> (&[f64], &[f64]) {
        match self {
            Layer::Dense(d) => (&d.gw, &d.gb),
            Layer::Conv(c) => (&c.gw, &c.gb),
            _ => (&[], &[]),
        }
    }

    pub fn zero_grads(&mut self) {
        match self {
            Layer::Dense(d) => {
                d.gw.iter_mut().for_each(|g| *g = 0.0);
                d.gb.iter_mut().for_each(|g| *g = 0.0);
            }
            Layer::Conv(c) => {
                c.gw.iter_mut().for_each(|g| *g = 0.0);
                c.gb.iter_mut().for_each(|g| *g = 0.0);
            }
            _ => {}
        }
    }

    /// Pure forward pass with dropout as identity.
    pub fn predict(&self, x: &Tensor) -> Tensor {
        match self {
            Layer::Dense(d) => dense_forward(d, x),
            Layer::Conv(c) => conv_forward(c, x),
            Layer::Relu(_) => relu_forward(x),
            Layer::Dropout(_) => x.clone(),
            Layer::Softmax(_) => softmax_forward(x),
        }
    }

    /// Training forward: caches activations and samples dropout masks.
    pub fn forward_train(&mut self, x: &Tensor, rng: &mut ChaCha12Rng) -> Tensor {
        match self {
            Layer::Dense(d) => {
                d.cached_input = x.data().to_vec();
                d.cached_rows = x.rows();
                dense_forward(d, x)
            }
            Layer::Conv(c) => {
                c.cached_input = x.data().to_vec();
                c.cached_rows = x.rows();
                conv_forward(c, x)
            }
            Layer::Relu(r) => {
                r.cached_input = x.data().to_vec();
                relu_forward(x)
            }
            Layer::Dropout(d) => {
                let keep = 1.0 - d.rate;
                let scale = 1.0 / keep;
                d.mask = x
                    .data()
                    .iter()
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                    .collect();
                let data = x.data().iter().zip(&d.mask).map(|(v, m)| v * m).collect();
                Tensor::from_parts(x.shape().to_vec(), data)
            }
            Layer::Softmax(s) => {
                let out = softmax_forward(x);
                s.cached_output = out.data().to_vec();
                s.cached_rows = out.rows();
                out
            }
        }
    }

    /// Forward pass reusing the dropout masks of the last training
    /// forward; used by finite-difference gradient checks.
    pub fn forward_frozen(&self, x: &Tensor) -> Tensor {
        match self {
            Layer::Dropout(d) => {
                assert_eq!(
                    d.mask.len(),
                    x.data().len(),
                    "frozen forward requires the batch that sampled the masks"
                );
                let data = x.data().iter().zip(&d.mask).map(|(v, m)| v * m).collect();
                Tensor::from_parts(x.shape().to_vec(), data)
            }
            other => other.predict(x),
        }
    }

    /// Backpropagate `grad` (d loss / d output), accumulating parameter
    /// gradients and returning d loss / d input. Softmax is handled by the
    /// fused cross-entropy seed in the network and never appears here.
    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        match self {
            Layer::Dense(d) => dense_backward(d, grad),
            Layer::Conv(c) => conv_backward(c, grad),
            Layer::Relu(r) => {
                let data = grad
                    .data()
                    .iter()
                    .zip(&r.cached_input)
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                Tensor::from_parts(grad.shape().to_vec(), data)
            }
            Layer::Dropout(d) => {
                let data = grad
                    .data()
                    .iter()
                    .zip(&d.mask)
                    .map(|(g, m)| g * m)
                    .collect();
                Tensor::from_parts(grad.shape().to_vec(), data)
            }
            Layer::Softmax(_) => unreachable!("softmax gradient is fused with the loss"),
        }
    }

    pub fn cached_softmax_output(&self) -> Option<(&[f64], usize)> {
        match self {
            Layer::Softmax(s) if s.cached_rows > 0 => Some((&s.cached_output, s.cached_rows)),
            _ => None,
        }
    }

    pub fn dropout_mask_len(&self) -> Option<usize> {
        match self {
            Layer::Dropout(d) => Some(d.mask.len()),
            _ => None,
        }
    }
}

fn dense_forward(d: &DenseState, x: &Tensor) -> Tensor {
    let rows = x.rows();
    let mut out = vec![0.0; rows * d.units];
    for b in 0..rows {
        let xr = x.row(b);
        let or = &mut out[b * d.units..(b + 1) * d.units];
        or.copy_from_slice(&d.b);
        for (k, &xv) in xr.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let wr = &d.w[k * d.units..(k + 1) * d.units];
            for (o, w) in or.iter_mut().zip(wr) {
                *o += xv * w;
            }
        }
    }
    Tensor::from_parts(vec![rows, d.units], out)
}

fn dense_backward(d: &mut DenseState, grad: &Tensor) -> Tensor {
    let rows = d.cached_rows;
    debug_assert_eq!(grad.rows(), rows);
    let mut din = vec![0.0; rows * d.inputs];
    for b in 0..rows {
        let xr = &d.cached_input[b * d.inputs..(b + 1) * d.inputs];
        let gr = grad.row(b);
        for (gb, g) in d.gb.iter_mut().zip(gr) {
            *gb += g;
        }
        for (k, &xv) in xr.iter().enumerate() {
            let gwr = &mut d.gw[k * d.units..(k + 1) * d.units];
            let mut acc = 0.0;
            let wr = &d.w[k * d.units..(k + 1) * d.units];
            for j in 0..d.units {
                gwr[j] += xv * gr[j];
                acc += wr[j] * gr[j];
            }
            din[b * d.inputs + k] = acc;
        }
    }
    Tensor::from_parts(vec![rows, d.inputs], din)
}

fn conv_forward(c: &ConvState, x: &Tensor) -> Tensor {
    let rows = x.rows();
    let w_in = c.input_width;
    let m = c.width;
    let mut out = vec![0.0; rows * c.filters * w_in];
    for b in 0..rows {
        let xr = x.row(b);
        for f in 0..c.filters {
            let or = &mut out[(b * c.filters + f) * w_in..(b * c.filters + f + 1) * w_in];
            for (t, o) in or.iter_mut().enumerate() {
                let mut acc = c.b[f];
                for r in 0..CANDLE_ROWS {
                    let wr = &c.w[(f * CANDLE_ROWS + r) * m..(f * CANDLE_ROWS + r + 1) * m];
                    for (j, w) in wr.iter().enumerate() {
                        // causal: column j of the kernel reads day t-(m-1)+j
                        let s = t as isize - (m as isize - 1) + j as isize;
                        if s >= 0 {
                            acc += w * xr[r * w_in + s as usize];
                        }
                    }
                }
                *o = acc;
            }
        }
    }
    Tensor::from_parts(vec![rows, c.filters * w_in], out)
}

fn conv_backward(c: &mut ConvState, grad: &Tensor) -> Tensor {
    let rows = c.cached_rows;
    debug_assert_eq!(grad.rows(), rows);
    let w_in = c.input_width;
    let m = c.width;
    let mut din = vec![0.0; rows * CANDLE_ROWS * w_in];
    for b in 0..rows {
        let xr = &c.cached_input[b * CANDLE_ROWS * w_in..(b + 1) * CANDLE_ROWS * w_in];
        let gr = grad.row(b);
        for f in 0..c.filters {
            let gf = &gr[f * w_in..(f + 1) * w_in];
            c.gb[f] += gf.iter().sum::<f64>();
            for r in 0..CANDLE_ROWS {
                let gwr = &mut c.gw[(f * CANDLE_ROWS + r) * m..(f * CANDLE_ROWS + r + 1) * m];
                let wr = &c.w[(f * CANDLE_ROWS + r) * m..(f * CANDLE_ROWS + r + 1) * m];
                for j in 0..m {
                    let mut acc = 0.0;
                    for (t, g) in gf.iter().enumerate() {
                        let s = t as isize - (m as isize - 1) + j as isize;
                        if s >= 0 {
                            acc += g * xr[r * w_in + s as usize];
                        }
                    }
                    gwr[j] += acc;
                    // scatter into d input: out column t reads input s
                    for (t, g) in gf.iter().enumerate() {
                        let s = t as isize - (m as isize - 1) + j as isize;
                        if s >= 0 {
                            din[b * CANDLE_ROWS * w_in + r * w_in + s as usize] += wr[j] * g;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_parts(vec![rows, CANDLE_ROWS * w_in], din)
}

fn relu_forward(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|v| v.max(0.0)).collect();
    Tensor::from_parts(x.shape().to_vec(), data)
}

fn softmax_forward(x: &Tensor) -> Tensor {
    let rows = x.rows();
    let cols = x.cols();
    let mut out = vec![0.0; rows * cols];
    for b in 0..rows {
        let xr = x.row(b);
        let max = xr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let or = &mut out[b * cols..(b + 1) * cols];
        let mut sum = 0.0;
        for (o, v) in or.iter_mut().zip(xr) {
            *o = (v - max).exp();
            sum += *o;
        }
        or.iter_mut().for_each(|o| *o /= sum);
    }
    Tensor::from_parts(vec![rows, cols], out)
}
