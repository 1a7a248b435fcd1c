//! Reverse-mode gradients for [`Network`].

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{ForwardCache, Layer, LayerCache, Network, HEAD_COUNT};

#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense { weight: Matrix, bias: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    Head { weight: Matrix, bias: Vec<f64> },
    None,
}

/// Parameter gradients, one entry per network layer in layer order.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Gradient tensors in the same canonical order as
    /// [`Network::param_tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                LayerGrads::Dense { weight, bias } | LayerGrads::Head { weight, bias } => {
                    out.push(weight.data());
                    out.push(bias.as_slice());
                }
                LayerGrads::BatchNorm { gamma, beta } => {
                    out.push(gamma.as_slice());
                    out.push(beta.as_slice());
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

impl Network {
    /// Backpropagates the per-head logit gradients produced by the loss
    /// through the cached forward pass. Heads feed gradient back into the
    /// trunk at their attachment point; batchnorm is differentiated through
    /// the batch statistics.
    pub fn backward(&self, cache: &ForwardCache, head_grads: &[Matrix]) -> Result<Gradients> {
        if head_grads.len() != HEAD_COUNT {
            return Err(Error::Internal(format!("expected 3 head gradients, got {}", head_grads.len())));
        }
        if cache.layers.len() != self.layers().len() {
            return Err(Error::Internal("forward cache does not match network".into()));
        }
        let rows = cache.batch_rows;
        for (i, g) in head_grads.iter().enumerate() {
            if g.rows() != rows || g.cols() != self.class_count() {
                return Err(Error::Internal(format!(
                    "head {i} gradient is {}x{}, expected {rows}x{}",
                    g.rows(),
                    g.cols(),
                    self.class_count()
                )));
            }
        }

        let trunk_out_width = match self.layers().last() {
            Some(Layer::Head(h)) => h.in_width,
            _ => return Err(Error::Internal("network does not end with a head".into())),
        };
        let mut dx = Matrix::zeros(rows, trunk_out_width);
        let mut head_idx = HEAD_COUNT;
        let mut grads = vec![LayerGrads::None; self.layers().len()];

        for (i, (layer, lc)) in self.layers().iter().zip(&cache.layers).enumerate().rev() {
            match (layer, lc) {
                (Layer::Head(h), LayerCache::Head { input }) => {
                    head_idx -= 1;
                    let dz = &head_grads[head_idx];
                    let dw = input.t_matmul(dz);
                    let db = dz.col_sums();
                    let into_trunk = dz.matmul_t(&h.weight);
                    for (a, b) in dx.data_mut().iter_mut().zip(into_trunk.data()) {
                        *a += b;
                    }
                    grads[i] = LayerGrads::Head { weight: dw, bias: db };
                }
                (Layer::Dense(d), LayerCache::Dense { input }) => {
                    let dw = input.t_matmul(&dx);
                    let db = dx.col_sums();
                    grads[i] = LayerGrads::Dense { weight: dw, bias: db };
                    dx = dx.matmul_t(&d.weight);
                }
                (Layer::Relu, LayerCache::Relu { output }) => {
                    for (g, &y) in dx.data_mut().iter_mut().zip(output.data()) {
                        if y <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
                (Layer::BatchNorm(b), LayerCache::BatchNorm { x_hat, inv_std }) => {
                    let n = rows as f64;
                    let w = b.width;
                    let mut dgamma = vec![0.0; w];
                    let mut dbeta = vec![0.0; w];
                    let mut sum_dxhat = vec![0.0; w];
                    let mut sum_dxhat_xhat = vec![0.0; w];
                    for r in 0..rows {
                        let dr = dx.row(r);
                        let xr = x_hat.row(r);
                        for j in 0..w {
                            dgamma[j] += dr[j] * xr[j];
                            dbeta[j] += dr[j];
                            let dxh = dr[j] * b.gamma[j];
                            sum_dxhat[j] += dxh;
                            sum_dxhat_xhat[j] += dxh * xr[j];
                        }
                    }
                    let mut din = Matrix::zeros(rows, w);
                    for r in 0..rows {
                        let dr = dx.row(r);
                        let xr = x_hat.row(r);
                        let out = din.row_mut(r);
                        for j in 0..w {
                            let dxh = dr[j] * b.gamma[j];
                            out[j] = inv_std[j] / n
                                * (n * dxh - sum_dxhat[j] - xr[j] * sum_dxhat_xhat[j]);
                        }
                    }
                    grads[i] = LayerGrads::BatchNorm { gamma: dgamma, beta: dbeta };
                    dx = din;
                }
                (Layer::ConcatInput, LayerCache::ConcatInput { trunk_width }) => {
                    // The appended raw-input columns feed no trainable
                    // parameters upstream of the first layer; drop them.
                    dx = dx.take_cols(*trunk_width);
                }
                _ => return Err(Error::Internal(format!("cache mismatch at layer {i}"))),
            }
        }
        if head_idx != 0 {
            return Err(Error::Internal("not all head gradients were consumed".into()));
        }
        Ok(Gradients { layers: grads })
    }
}
