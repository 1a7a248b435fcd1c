//! Adam optimizer with bias correction.

use crate::error::{Error, Result};

use super::{Gradients, Network};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment accumulators, one pair per parameter tensor in
/// the network's canonical tensor order.
#[derive(Debug, Clone)]
pub struct AdamState {
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network) -> AdamState {
        let shapes: Vec<usize> = net.param_tensors().iter().map(|t| t.len()).collect();
        AdamState {
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One Adam update:
/// `m = b1*m + (1-b1)*g`, `v = b2*v + (1-b2)*g^2`,
/// `theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)`.
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let grad_tensors = grads.tensors();
    if grad_tensors.len() != state.m.len() {
        return Err(Error::Internal(format!(
            "gradient tensor count {} does not match optimizer state {}",
            grad_tensors.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let mc = 1.0 - BETA1.powi(state.t as i32);
    let vc = 1.0 - BETA2.powi(state.t as i32);
    let mut params = net.param_tensors_mut();
    for (i, tensor) in params.iter_mut().enumerate() {
        let g = grad_tensors[i];
        if g.len() != tensor.len() {
            return Err(Error::Internal(format!(
                "gradient tensor {i} has {} values, parameter has {}",
                g.len(),
                tensor.len()
            )));
        }
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        for j in 0..g.len() {
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
            let m_hat = m[j] / mc;
            let v_hat = v[j] / vc;
            tensor[j] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
