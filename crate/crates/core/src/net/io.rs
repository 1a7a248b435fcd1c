//! Model save/load as versioned JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{
    BatchNormLayer, DenseLayer, HeadActivation, HeadLayer, Layer, Mode, Network, HEAD_COUNT,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_width: usize,
    class_count: usize,
    head_weights: [f64; 3],
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerFile {
    Dense {
        in_width: usize,
        out_width: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    #[serde(rename = "batchnorm")]
    BatchNorm {
        width: usize,
        gamma: Vec<f64>,
        beta: Vec<f64>,
        running_mean: Vec<f64>,
        running_var: Vec<f64>,
    },
    ConcatInput,
    Head {
        in_width: usize,
        out_width: usize,
        activation: HeadActivation,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
}

/// Writes the network, including batchnorm running statistics, as JSON.
/// All values are f64 and round-trip bit-exactly through serde_json.
pub fn save_model(net: &Network, path: &Path) -> Result<()> {
    let layers = net
        .layers()
        .iter()
        .map(|layer| match layer {
            Layer::Dense(d) => LayerFile::Dense {
                in_width: d.in_width,
                out_width: d.out_width,
                weight: d.weight.data().to_vec(),
                bias: d.bias.clone(),
            },
            Layer::Relu => LayerFile::Relu,
            Layer::BatchNorm(b) => LayerFile::BatchNorm {
                width: b.width,
                gamma: b.gamma.clone(),
                beta: b.beta.clone(),
                running_mean: b.running_mean.clone(),
                running_var: b.running_var.clone(),
            },
            Layer::ConcatInput => LayerFile::ConcatInput,
            Layer::Head(h) => LayerFile::Head {
                in_width: h.in_width,
                out_width: h.out_width,
                activation: h.activation,
                weight: h.weight.data().to_vec(),
                bias: h.bias.clone(),
            },
        })
        .collect();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        input_width: net.input_width(),
        class_count: net.class_count(),
        head_weights: net.head_weights(),
        layers,
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &file)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn check_len(path: &Path, field: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Data(format!(
            "{}: field `{field}` has {got} values, expected {want}",
            path.display()
        )));
    }
    Ok(())
}

/// Reads a model written by [`save_model`], validating the format version
/// and every tensor shape. The returned network is in infer mode.
pub fn load_model(path: &Path) -> Result<Network> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let file: ModelFile = serde_json::from_reader(reader)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported model format version {} (supported: {MODEL_FORMAT_VERSION})",
            path.display(),
            file.format_version
        )));
    }
    if file.input_width == 0 || file.class_count == 0 {
        return Err(Error::Data(format!(
            "{}: input_width and class_count must be >= 1",
            path.display()
        )));
    }
    if file.head_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::Data(format!(
            "{}: head_weights must be positive and finite",
            path.display()
        )));
    }
    let total: f64 = file.head_weights.iter().sum();
    let head_weights = [
        file.head_weights[0] / total,
        file.head_weights[1] / total,
        file.head_weights[2] / total,
    ];

    let mut layers = Vec::with_capacity(file.layers.len());
    let mut width = file.input_width;
    let mut heads = 0usize;
    for (i, lf) in file.layers.into_iter().enumerate() {
        match lf {
            LayerFile::Dense { in_width, out_width, weight, bias } => {
                if in_width != width {
                    return Err(Error::Data(format!(
                        "{}: layer {i} dense in_width {in_width} does not chain from {width}",
                        path.display()
                    )));
                }
                check_len(path, "weight", weight.len(), in_width * out_width)?;
                check_len(path, "bias", bias.len(), out_width)?;
                layers.push(Layer::Dense(DenseLayer {
                    in_width,
                    out_width,
                    weight: Matrix::from_vec(in_width, out_width, weight),
                    bias,
                }));
                width = out_width;
            }
            LayerFile::Relu => layers.push(Layer::Relu),
            LayerFile::BatchNorm { width: w, gamma, beta, running_mean, running_var } => {
                if w != width {
                    return Err(Error::Data(format!(
                        "{}: layer {i} batchnorm width {w} does not chain from {width}",
                        path.display()
                    )));
                }
                check_len(path, "gamma", gamma.len(), w)?;
                check_len(path, "beta", beta.len(), w)?;
                check_len(path, "running_mean", running_mean.len(), w)?;
                check_len(path, "running_var", running_var.len(), w)?;
                if running_var.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::Data(format!(
                        "{}: layer {i} running_var must be finite and non-negative",
                        path.display()
                    )));
                }
                layers.push(Layer::BatchNorm(BatchNormLayer {
                    width: w,
                    gamma,
                    beta,
                    running_mean,
                    running_var,
                }));
            }
            LayerFile::ConcatInput => {
                layers.push(Layer::ConcatInput);
                width += file.input_width;
            }
            LayerFile::Head { in_width, out_width, activation, weight, bias } => {
                if in_width != width {
                    return Err(Error::Data(format!(
                        "{}: layer {i} head in_width {in_width} does not chain from {width}",
                        path.display()
                    )));
                }
                if out_width != file.class_count {
                    return Err(Error::Data(format!(
                        "{}: layer {i} head out_width {out_width} does not match class_count {}",
                        path.display(),
                        file.class_count
                    )));
                }
                let ok = match activation {
                    HeadActivation::Sigmoid => file.class_count == 1,
                    HeadActivation::Softmax => file.class_count >= 2,
                };
                if !ok {
                    return Err(Error::Data(format!(
                        "{}: layer {i} head activation does not match class_count {}",
                        path.display(),
                        file.class_count
                    )));
                }
                check_len(path, "weight", weight.len(), in_width * out_width)?;
                check_len(path, "bias", bias.len(), out_width)?;
                layers.push(Layer::Head(HeadLayer {
                    in_width,
                    out_width,
                    weight: Matrix::from_vec(in_width, out_width, weight),
                    bias,
                    activation,
                }));
                heads += 1;
            }
        }
    }
    if heads != HEAD_COUNT {
        return Err(Error::Data(format!(
            "{}: model must contain exactly 3 heads, got {heads}",
            path.display()
        )));
    }
    if !matches!(layers.last(), Some(Layer::Head(_))) {
        return Err(Error::Data(format!("{}: model must end with a head", path.display())));
    }
    Ok(Network::from_parts(file.input_width, file.class_count, head_weights, layers, Mode::Infer))
}
