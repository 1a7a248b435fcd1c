//! Head-weighted losses and their exact pre-activation gradients.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::HEAD_COUNT;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// logs. The clamp is part of the loss: its gradient is exactly zero on the
/// flat regions, and the analytic gradients below honor that.
pub const PROB_CLAMP: f64 = 1e-7;

/// Training targets for the three-head losses.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// One 0/1 value per batch row; heads must have width 1.
    Binary(&'a [f64]),
    /// One class index per batch row; heads must be softmax-width.
    Sparse(&'a [usize]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Binary(y) => y.len(),
            Targets::Sparse(y) => y.len(),
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn in_clamp_band(p: f64) -> bool {
    p > PROB_CLAMP && p < 1.0 - PROB_CLAMP
}

fn check_heads(heads: &[Matrix], rows: usize, cols: usize) -> Result<()> {
    if heads.len() != HEAD_COUNT {
        return Err(Error::Internal(format!("expected 3 head outputs, got {}", heads.len())));
    }
    for (i, h) in heads.iter().enumerate() {
        if h.rows() != rows || h.cols() != cols {
            return Err(Error::Internal(format!(
                "head {i} output is {}x{}, expected {rows}x{cols}",
                h.rows(),
                h.cols()
            )));
        }
    }
    Ok(())
}

/// Combined loss over the three heads plus the gradient of that loss with
/// respect to each head's pre-activation logits.
pub fn loss_and_grads(
    heads: &[Matrix],
    targets: Targets<'_>,
    head_weights: [f64; 3],
) -> Result<(f64, Vec<Matrix>)> {
    match targets {
        Targets::Binary(y) => loss_bfc(heads, y, head_weights),
        Targets::Sparse(y) => loss_mfec(heads, y, head_weights),
    }
}

/// Binary cross-entropy summed over the heads with weights `head_weights`,
/// averaged over the batch within each head:
/// `-sum_i w_i * mean_b [ y ln p + (1 - y) ln(1 - p) ]`.
///
/// Returns the loss and per-head gradients with respect to the sigmoid
/// logits; each unclamped element contributes `w_i / B * (p - y)`.
pub fn loss_bfc(heads: &[Matrix], labels: &[f64], head_weights: [f64; 3]) -> Result<(f64, Vec<Matrix>)> {
    let b = labels.len();
    if b == 0 {
        return Err(Error::Internal("loss over empty batch".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data(format!("binary label must be 0 or 1, got {bad}")));
    }
    check_heads(heads, b, 1)?;

    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(HEAD_COUNT);
    for (head, &w) in heads.iter().zip(&head_weights) {
        let mut head_sum = 0.0;
        let mut dz = Matrix::zeros(b, 1);
        for (i, &y) in labels.iter().enumerate() {
            let p = head.get(i, 0);
            let pc = clamp_prob(p);
            head_sum += y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
            if in_clamp_band(p) {
                dz.set(i, 0, w / b as f64 * (p - y));
            }
        }
        loss -= w * head_sum / b as f64;
        grads.push(dz);
    }
    Ok((loss, grads))
}

/// Sparse categorical cross-entropy summed over the heads with weights
/// `head_weights`: `-sum_i w_i * mean_b [ ln p[b, label_b] ]`.
///
/// Returns the loss and per-head gradients with respect to the softmax
/// logits; rows whose target probability is unclamped contribute
/// `w_i / B * (p - onehot(label))`.
pub fn loss_mfec(
    heads: &[Matrix],
    labels: &[usize],
    head_weights: [f64; 3],
) -> Result<(f64, Vec<Matrix>)> {
    let b = labels.len();
    if b == 0 {
        return Err(Error::Internal("loss over empty batch".into()));
    }
    let classes = heads.first().map(Matrix::cols).unwrap_or(0);
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Data(format!("class label {bad} out of range for {classes} classes")));
    }
    check_heads(heads, b, classes)?;

    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(HEAD_COUNT);
    for (head, &w) in heads.iter().zip(&head_weights) {
        let mut head_sum = 0.0;
        let mut dz = Matrix::zeros(b, classes);
        for (i, &y) in labels.iter().enumerate() {
            let p_target = head.get(i, y);
            head_sum += clamp_prob(p_target).ln();
            if in_clamp_band(p_target) {
                let scale = w / b as f64;
                let row = head.row(i);
                let out = dz.row_mut(i);
                for j in 0..classes {
                    out[j] = scale * (row[j] - if j == y { 1.0 } else { 0.0 });
                }
            }
        }
        loss -= w * head_sum / b as f64;
        grads.push(dz);
    }
    Ok((loss, grads))
}
