//! Feed-forward network engine with exact analytic gradients.
//!
//! The layer vocabulary is fixed: dense, ReLU, batch normalization,
//! input re-concatenation, and prediction heads. A network carries exactly
//! three heads; each head is a linear projection of the trunk features at
//! its attachment point followed by sigmoid (1 class) or row softmax
//! (>= 2 classes). Head losses are combined with per-head weights.

mod adam;
mod fit;
mod grad;
mod io;
mod loss;

pub use adam::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use fit::{fit, FitSpec};
pub use grad::{Gradients, LayerGrads};
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use loss::{loss_and_grads, loss_bfc, loss_mfec, Targets, PROB_CLAMP};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const HEAD_COUNT: usize = 3;

/// Epsilon inside the batchnorm variance square root.
pub const BN_EPS: f64 = 1e-5;
/// Momentum of the running-statistics exponential moving average.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadActivation {
    Sigmoid,
    Softmax,
}

/// One entry of an architecture description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Dense { width: usize },
    Relu,
    BatchNorm,
    /// Re-concatenates the raw network input onto the current features.
    ConcatInput,
    Head { activation: HeadActivation },
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_width: usize,
    pub out_width: usize,
    /// Row-major, shape `in_width x out_width`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormLayer {
    pub width: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HeadLayer {
    pub in_width: usize,
    pub out_width: usize,
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: HeadActivation,
}

#[derive(Debug, Clone)]
pub enum Layer {
    Dense(DenseLayer),
    Relu,
    BatchNorm(BatchNormLayer),
    ConcatInput,
    Head(HeadLayer),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A layered model with three weighted prediction heads.
#[derive(Debug, Clone)]
pub struct Network {
    input_width: usize,
    class_count: usize,
    /// Normalized head loss weights (sum to 1).
    head_weights: [f64; 3],
    layers: Vec<Layer>,
    mode: Mode,
}

/// Per-layer activations recorded by a train-mode forward pass.
pub struct ForwardCache {
    pub(crate) batch_rows: usize,
    pub(crate) layers: Vec<LayerCache>,
}

pub(crate) enum LayerCache {
    Dense { input: Matrix },
    Relu { output: Matrix },
    BatchNorm { x_hat: Matrix, inv_std: Vec<f64> },
    ConcatInput { trunk_width: usize },
    Head { input: Matrix },
}

/// The full cascade architecture: nine dense layers counting the output
/// head, each trunk layer followed by batchnorm + ReLU. Sub-output heads
/// branch off after the third and sixth trunk layers, and the raw input
/// is concatenated back in before the fourth and seventh. The trunk never
/// narrows below 32 units; the heads do the projection to class width, so
/// no batch-normalized bottleneck sits in front of a head.
pub fn default_arch(class_count: usize) -> Vec<LayerSpec> {
    let act = if class_count == 1 { HeadActivation::Sigmoid } else { HeadActivation::Softmax };
    let mut arch = Vec::new();
    let widths = [256usize, 256, 128, 128, 64, 64, 32, 32];
    for (i, &w) in widths.iter().enumerate() {
        arch.push(LayerSpec::Dense { width: w });
        arch.push(LayerSpec::BatchNorm);
        arch.push(LayerSpec::Relu);
        if i == 2 || i == 5 {
            arch.push(LayerSpec::Head { activation: act });
            arch.push(LayerSpec::ConcatInput);
        }
    }
    arch.push(LayerSpec::Head { activation: act });
    arch
}

/// A compact architecture for auxiliary classifiers (two dense blocks,
/// all three heads stacked at the end).
pub fn small_arch(class_count: usize) -> Vec<LayerSpec> {
    let act = if class_count == 1 { HeadActivation::Sigmoid } else { HeadActivation::Softmax };
    vec![
        LayerSpec::Dense { width: 32 },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Dense { width: 16 },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::Head { activation: act },
        LayerSpec::Head { activation: act },
        LayerSpec::Head { activation: act },
    ]
}

fn he_uniform(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / fan_in as f64).sqrt();
    let mut data = Vec::with_capacity(fan_in * fan_out);
    for _ in 0..fan_in * fan_out {
        data.push(rng.gen_range(-limit..limit));
    }
    Matrix::from_vec(fan_in, fan_out, data)
}

/// Builds a network from an architecture description with He-uniform dense
/// weights, zero biases, and identity batchnorm parameters.
pub fn build_network(
    input_width: usize,
    class_count: usize,
    arch: &[LayerSpec],
    head_weights: [f64; 3],
    rng: &mut impl Rng,
) -> Result<Network> {
    if input_width == 0 {
        return Err(Error::Config("input width must be >= 1".into()));
    }
    if class_count == 0 {
        return Err(Error::Config("class count must be >= 1".into()));
    }
    if head_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Config(format!("head weights must be positive, got {head_weights:?}")));
    }
    let total: f64 = head_weights.iter().sum();
    let head_weights = [head_weights[0] / total, head_weights[1] / total, head_weights[2] / total];

    let mut layers = Vec::with_capacity(arch.len());
    let mut width = input_width;
    let mut heads = 0usize;
    for (i, spec) in arch.iter().enumerate() {
        match *spec {
            LayerSpec::Dense { width: out } => {
                if out == 0 {
                    return Err(Error::Config(format!("layer {i}: dense width must be >= 1")));
                }
                layers.push(Layer::Dense(DenseLayer {
                    in_width: width,
                    out_width: out,
                    weight: he_uniform(rng, width, out),
                    bias: vec![0.0; out],
                }));
                width = out;
            }
            LayerSpec::Relu => layers.push(Layer::Relu),
            LayerSpec::BatchNorm => layers.push(Layer::BatchNorm(BatchNormLayer {
                width,
                gamma: vec![1.0; width],
                beta: vec![0.0; width],
                running_mean: vec![0.0; width],
                running_var: vec![1.0; width],
            })),
            LayerSpec::ConcatInput => {
                layers.push(Layer::ConcatInput);
                width += input_width;
            }
            LayerSpec::Head { activation } => {
                match activation {
                    HeadActivation::Sigmoid if class_count != 1 => {
                        return Err(Error::Config(format!(
                            "layer {i}: sigmoid head requires class count 1, got {class_count}"
                        )));
                    }
                    HeadActivation::Softmax if class_count < 2 => {
                        return Err(Error::Config(format!(
                            "layer {i}: softmax head requires class count >= 2, got {class_count}"
                        )));
                    }
                    _ => {}
                }
                layers.push(Layer::Head(HeadLayer {
                    in_width: width,
                    out_width: class_count,
                    weight: he_uniform(rng, width, class_count),
                    bias: vec![0.0; class_count],
                    activation,
                }));
                heads += 1;
            }
        }
    }
    if heads != HEAD_COUNT {
        return Err(Error::Config(format!("architecture must contain exactly 3 heads, got {heads}")));
    }
    if !matches!(layers.last(), Some(Layer::Head(_))) {
        return Err(Error::Config("architecture must end with a head".into()));
    }
    Ok(Network { input_width, class_count, head_weights, layers, mode: Mode::Train })
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Row-wise numerically stable softmax, in place.
pub(crate) fn softmax_rows(m: &mut Matrix) {
    for i in 0..m.rows() {
        let row = m.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl Network {
    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn head_weights(&self) -> [f64; 3] {
        self.head_weights
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn from_parts(
        input_width: usize,
        class_count: usize,
        head_weights: [f64; 3],
        layers: Vec<Layer>,
        mode: Mode,
    ) -> Network {
        Network { input_width, class_count, head_weights, layers, mode }
    }

    /// Trainable parameter tensors in a fixed layer order
    /// (dense/head: weight then bias; batchnorm: gamma then beta).
    pub fn param_tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weight.data());
                    out.push(d.bias.as_slice());
                }
                Layer::Head(h) => {
                    out.push(h.weight.data());
                    out.push(h.bias.as_slice());
                }
                Layer::BatchNorm(b) => {
                    out.push(b.gamma.as_slice());
                    out.push(b.beta.as_slice());
                }
                Layer::Relu | Layer::ConcatInput => {}
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(d.weight.data_mut());
                    out.push(d.bias.as_mut_slice());
                }
                Layer::Head(h) => {
                    out.push(h.weight.data_mut());
                    out.push(h.bias.as_mut_slice());
                }
                Layer::BatchNorm(b) => {
                    out.push(b.gamma.as_mut_slice());
                    out.push(b.beta.as_mut_slice());
                }
                Layer::Relu | Layer::ConcatInput => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_width {
            return Err(Error::Data(format!(
                "batch width {} does not match network input width {}",
                batch.cols(),
                self.input_width
            )));
        }
        if !batch.is_finite() {
            return Err(Error::Data("batch contains non-finite values".into()));
        }
        Ok(())
    }

    /// Train-mode forward pass. Uses batch statistics for batchnorm, updates
    /// the running statistics, and records the activations needed by
    /// [`Network::backward`]. Requires at least two rows.
    pub fn train_forward(&mut self, batch: &Matrix) -> Result<(Vec<Matrix>, ForwardCache)> {
        if self.mode != Mode::Train {
            return Err(Error::Internal("train_forward called on infer-mode network".into()));
        }
        self.check_batch(batch)?;
        if batch.rows() < 2 {
            return Err(Error::Data(format!(
                "train-mode batch needs >= 2 rows for batch statistics, got {}",
                batch.rows()
            )));
        }

        let rows = batch.rows();
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut heads = Vec::with_capacity(HEAD_COUNT);
        let mut x = batch.clone();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    let mut y = x.matmul(&d.weight);
                    y.add_row(&d.bias);
                    caches.push(LayerCache::Dense { input: std::mem::replace(&mut x, y) });
                }
                Layer::Relu => {
                    x = x.map(|v| v.max(0.0));
                    caches.push(LayerCache::Relu { output: x.clone() });
                }
                Layer::BatchNorm(b) => {
                    let n = rows as f64;
                    let mut x_hat = Matrix::zeros(rows, b.width);
                    let mut inv_std = Vec::with_capacity(b.width);
                    let sums = x.col_sums();
                    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
                    let mut vars = vec![0.0; b.width];
                    for i in 0..rows {
                        for (j, &v) in x.row(i).iter().enumerate() {
                            let d = v - means[j];
                            vars[j] += d * d;
                        }
                    }
                    for v in &mut vars {
                        *v /= n;
                    }
                    for j in 0..b.width {
                        inv_std.push(1.0 / (vars[j] + BN_EPS).sqrt());
                    }
                    let mut y = Matrix::zeros(rows, b.width);
                    for i in 0..rows {
                        for j in 0..b.width {
                            let xh = (x.get(i, j) - means[j]) * inv_std[j];
                            x_hat.set(i, j, xh);
                            y.set(i, j, b.gamma[j] * xh + b.beta[j]);
                        }
                    }
                    for j in 0..b.width {
                        b.running_mean[j] = BN_MOMENTUM * b.running_mean[j] + (1.0 - BN_MOMENTUM) * means[j];
                        b.running_var[j] = BN_MOMENTUM * b.running_var[j] + (1.0 - BN_MOMENTUM) * vars[j];
                    }
                    x = y;
                    caches.push(LayerCache::BatchNorm { x_hat, inv_std });
                }
                Layer::ConcatInput => {
                    caches.push(LayerCache::ConcatInput { trunk_width: x.cols() });
                    x = x.hstack(batch);
                }
                Layer::Head(h) => {
                    let mut z = x.matmul(&h.weight);
                    z.add_row(&h.bias);
                    let probs = match h.activation {
                        HeadActivation::Sigmoid => z.map(sigmoid),
                        HeadActivation::Softmax => {
                            softmax_rows(&mut z);
                            z
                        }
                    };
                    heads.push(probs);
                    caches.push(LayerCache::Head { input: x.clone() });
                }
            }
        }
        Ok((heads, ForwardCache { batch_rows: rows, layers: caches }))
    }

    /// Infer-mode forward pass: batchnorm uses frozen running statistics,
    /// nothing is mutated, and any batch size >= 1 is accepted.
    pub fn infer_forward(&self, batch: &Matrix) -> Result<Vec<Matrix>> {
        if self.mode != Mode::Infer {
            return Err(Error::Internal("infer_forward called on train-mode network".into()));
        }
        self.check_batch(batch)?;
        let rows = batch.rows();
        let mut heads = Vec::with_capacity(HEAD_COUNT);
        let mut x = batch.clone();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    let mut y = x.matmul(&d.weight);
                    y.add_row(&d.bias);
                    x = y;
                }
                Layer::Relu => x = x.map(|v| v.max(0.0)),
                Layer::BatchNorm(b) => {
                    for i in 0..rows {
                        let row = x.row_mut(i);
                        for j in 0..b.width {
                            let scale = b.gamma[j] / (b.running_var[j] + BN_EPS).sqrt();
                            row[j] = (row[j] - b.running_mean[j]) * scale + b.beta[j];
                        }
                    }
                }
                Layer::ConcatInput => x = x.hstack(batch),
                Layer::Head(h) => {
                    let mut z = x.matmul(&h.weight);
                    z.add_row(&h.bias);
                    let probs = match h.activation {
                        HeadActivation::Sigmoid => z.map(sigmoid),
                        HeadActivation::Softmax => {
                            softmax_rows(&mut z);
                            z
                        }
                    };
                    heads.push(probs);
                }
            }
        }
        Ok(heads)
    }
}
