use std::fmt;

use crate::error::{Result, TensorError};
use crate::nn::SameGeometry;

/// Declarative description of one network layer.
///
/// Shapes exclude the batch axis; every kind carries exactly the
/// hyper-parameters it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv1d {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    ConvTranspose1d {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    Conv2d {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
    },
    MaxPool2d {
        pool: usize,
        stride: usize,
    },
    BatchNorm {
        channels: usize,
    },
    LeakyRelu {
        alpha: f64,
    },
    Relu,
    Tanh,
    Sigmoid,
    PhaseShuffle {
        radius: usize,
    },
    Crop {
        target: usize,
    },
    Reshape {
        shape: Vec<usize>,
    },
}

/// A parameter a layer owns: local name, shape, and whether the optimizer
/// updates it (running statistics are not trained).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSlot {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub trainable: bool,
}

fn slot(name: &'static str, shape: Vec<usize>, trainable: bool) -> ParamSlot {
    ParamSlot {
        name,
        shape,
        trainable,
    }
}

impl LayerSpec {
    /// Short tag used in parameter names.
    pub fn tag(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv",
            LayerSpec::ConvTranspose1d { .. } => "tconv",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool",
            LayerSpec::BatchNorm { .. } => "bn",
            LayerSpec::LeakyRelu { .. } => "lrelu",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::PhaseShuffle { .. } => "shuffle",
            LayerSpec::Crop { .. } => "crop",
            LayerSpec::Reshape { .. } => "reshape",
        }
    }

    pub fn params(&self) -> Vec<ParamSlot> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => vec![
                slot("weight", vec![inputs, outputs], true),
                slot("bias", vec![outputs], true),
            ],
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
                ..
            }
            | LayerSpec::ConvTranspose1d {
                kernel,
                in_channels,
                out_channels,
                ..
            } => vec![
                slot("weight", vec![kernel, in_channels, out_channels], true),
                slot("bias", vec![out_channels], true),
            ],
            LayerSpec::Conv2d {
                kernel,
                in_channels,
                out_channels,
                ..
            } => vec![
                slot(
                    "weight",
                    vec![kernel, kernel, in_channels, out_channels],
                    true,
                ),
                slot("bias", vec![out_channels], true),
            ],
            LayerSpec::BatchNorm { channels } => vec![
                slot("gamma", vec![channels], true),
                slot("beta", vec![channels], true),
                slot("running_mean", vec![channels], false),
                slot("running_var", vec![channels], false),
            ],
            _ => Vec::new(),
        }
    }

    pub fn trainable_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.shape.iter().product::<usize>())
            .sum()
    }

    /// Output shape (without batch axis) for the given input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: &str| {
            TensorError::invalid(
                "layer_shape",
                format!("{self} expects {expected}, got {input:?}"),
            )
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => match input {
                [f] if *f == inputs => Ok(vec![outputs]),
                _ => Err(mismatch(&format!("[{inputs}]"))),
            },
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
                stride,
            } => match input {
                [len, c] if *c == in_channels => {
                    let geo = SameGeometry::new(*len, kernel, stride)?;
                    Ok(vec![geo.short_len, out_channels])
                }
                _ => Err(mismatch(&format!("[len, {in_channels}]"))),
            },
            LayerSpec::ConvTranspose1d {
                in_channels,
                out_channels,
                stride,
                ..
            } => match input {
                [len, c] if *c == in_channels => Ok(vec![len * stride, out_channels]),
                _ => Err(mismatch(&format!("[len, {in_channels}]"))),
            },
            LayerSpec::Conv2d {
                kernel,
                in_channels,
                out_channels,
                stride,
            } => match input {
                [h, w, c] if *c == in_channels => {
                    let gy = SameGeometry::new(*h, kernel, stride)?;
                    let gx = SameGeometry::new(*w, kernel, stride)?;
                    Ok(vec![gy.short_len, gx.short_len, out_channels])
                }
                _ => Err(mismatch(&format!("[h, w, {in_channels}]"))),
            },
            LayerSpec::MaxPool2d { pool, stride } => match input {
                [h, w, c] => {
                    let gy = SameGeometry::new(*h, pool, stride)?;
                    let gx = SameGeometry::new(*w, pool, stride)?;
                    Ok(vec![gy.short_len, gx.short_len, *c])
                }
                _ => Err(mismatch("[h, w, c]")),
            },
            LayerSpec::BatchNorm { channels } => match input.last() {
                Some(c) if *c == channels => Ok(input.to_vec()),
                _ => Err(mismatch(&format!("[.., {channels}]"))),
            },
            LayerSpec::PhaseShuffle { .. } => match input {
                [_, _] => Ok(input.to_vec()),
                _ => Err(mismatch("[len, c]")),
            },
            LayerSpec::Crop { target } => match input {
                [len, c] if *len >= target => Ok(vec![target, *c]),
                _ => Err(mismatch(&format!("[len >= {target}, c]"))),
            },
            LayerSpec::Reshape { ref shape } => {
                if shape.iter().product::<usize>() == input.iter().product::<usize>() {
                    Ok(shape.clone())
                } else {
                    Err(mismatch(&format!(
                        "{} elements",
                        shape.iter().product::<usize>()
                    )))
                }
            }
            LayerSpec::LeakyRelu { .. }
            | LayerSpec::Relu
            | LayerSpec::Tanh
            | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Dense { inputs, outputs } => write!(f, "Dense ({inputs}, {outputs})"),
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
                stride,
            } => write!(
                f,
                "Conv1D (stride={stride}) ({kernel}, {in_channels}, {out_channels})"
            ),
            LayerSpec::ConvTranspose1d {
                kernel,
                in_channels,
                out_channels,
                stride,
            } => write!(
                f,
                "Trans Conv1D (stride={stride}) ({kernel}, {in_channels}, {out_channels})"
            ),
            LayerSpec::Conv2d {
                kernel,
                in_channels,
                out_channels,
                stride,
            } => write!(
                f,
                "Conv2D (stride={stride}) ({kernel}, {kernel}, {in_channels}, {out_channels})"
            ),
            LayerSpec::MaxPool2d { stride, .. } => write!(f, "MaxPool2D (stride={stride})"),
            LayerSpec::BatchNorm { .. } => write!(f, "Batch Norm"),
            LayerSpec::LeakyRelu { alpha } => write!(f, "LReLU (alpha={alpha})"),
            LayerSpec::Relu => write!(f, "ReLU"),
            LayerSpec::Tanh => write!(f, "Tanh"),
            LayerSpec::Sigmoid => write!(f, "Sigmoid"),
            LayerSpec::PhaseShuffle { radius } => write!(f, "Phase Shuffle ({radius})"),
            LayerSpec::Crop { target } => write!(f, "Cropping ({target})"),
            LayerSpec::Reshape { shape } => write!(f, "Reshape {shape:?}"),
        }
    }
}
