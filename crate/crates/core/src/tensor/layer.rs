use super::checkpoint::RecordKind;
use super::conv::{conv_output_extent, conv_transpose_output_extent};
use super::{Tape, TensorError, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

/// One layer of an encoder or decoder stack. Extents exclude the batch axis.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    /// Cubic kernel, same stride on every spatial axis.
    Conv { in_channels: usize, out_channels: usize, kernel: usize, stride: usize },
    ConvTranspose { in_channels: usize, out_channels: usize, kernel: usize, stride: usize },
    Activation(Activation),
    Flatten,
    Reshape(Vec<usize>),
}

impl LayerSpec {
    /// Per-sample output extents for the given per-sample input extents.
    pub fn output_extents(&self, input: &[usize]) -> Result<Vec<usize>, TensorError> {
        let mismatch = |expected: Vec<usize>| TensorError::Dimension {
            op: "layer",
            lhs: input.to_vec(),
            rhs: expected,
        };
        match self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [*inputs] {
                    return Err(mismatch(vec![*inputs]));
                }
                Ok(vec![*outputs])
            }
            LayerSpec::Conv { in_channels, out_channels, kernel, stride } => {
                if !(input.len() == 3 || input.len() == 4) || input[0] != *in_channels {
                    return Err(mismatch(vec![*in_channels]));
                }
                let mut out = vec![*out_channels];
                for &e in &input[1..] {
                    out.push(conv_output_extent(e, *kernel, *stride).ok_or_else(|| mismatch(vec![*kernel]))?);
                }
                Ok(out)
            }
            LayerSpec::ConvTranspose { in_channels, out_channels, kernel, stride } => {
                if !(input.len() == 3 || input.len() == 4) || input[0] != *in_channels {
                    return Err(mismatch(vec![*in_channels]));
                }
                let mut out = vec![*out_channels];
                out.extend(input[1..].iter().map(|&e| conv_transpose_output_extent(e, *kernel, *stride)));
                Ok(out)
            }
            LayerSpec::Activation(_) => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape(shape) => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return Err(mismatch(shape.clone()));
                }
                Ok(shape.clone())
            }
        }
    }

    /// Shapes of the trainable tensors this layer owns, in application order.
    pub fn parameter_shapes(&self, spatial_rank: usize) -> Vec<(RecordKind, Vec<usize>)> {
        match self {
            LayerSpec::Dense { inputs, outputs } => vec![
                (RecordKind::DenseWeight, vec![*inputs, *outputs]),
                (RecordKind::DenseBias, vec![*outputs]),
            ],
            LayerSpec::Conv { in_channels, out_channels, kernel, .. } => {
                let mut k = vec![*out_channels, *in_channels];
                k.extend(std::iter::repeat_n(*kernel, spatial_rank));
                vec![(RecordKind::ConvKernel, k), (RecordKind::ConvBias, vec![*out_channels])]
            }
            LayerSpec::ConvTranspose { in_channels, out_channels, kernel, .. } => {
                let mut k = vec![*in_channels, *out_channels];
                k.extend(std::iter::repeat_n(*kernel, spatial_rank));
                vec![
                    (RecordKind::ConvTransposeKernel, k),
                    (RecordKind::ConvTransposeBias, vec![*out_channels]),
                ]
            }
            _ => Vec::new(),
        }
    }

    /// Records the layer on the tape. `params` holds exactly the tensors
    /// listed by [`LayerSpec::parameter_shapes`].
    pub fn apply(&self, tape: &mut Tape, x: Var, params: &[Var]) -> Result<Var, TensorError> {
        match self {
            LayerSpec::Dense { .. } => tape.dense(x, params[0], params[1]),
            LayerSpec::Conv { stride, .. } => tape.conv(x, params[0], Some(params[1]), *stride),
            LayerSpec::ConvTranspose { stride, .. } => tape.conv_transpose(x, params[0], Some(params[1]), *stride),
            LayerSpec::Activation(Activation::Relu) => Ok(tape.relu(x)),
            LayerSpec::Activation(Activation::Sigmoid) => Ok(tape.sigmoid(x)),
            LayerSpec::Activation(Activation::Identity) => Ok(x),
            LayerSpec::Flatten => {
                let batch = tape.shape(x)[0];
                let width = tape.value(x).len() / batch;
                tape.reshape(x, vec![batch, width])
            }
            LayerSpec::Reshape(shape) => {
                let mut full = vec![tape.shape(x)[0]];
                full.extend(shape);
                tape.reshape(x, full)
            }
        }
    }
}
