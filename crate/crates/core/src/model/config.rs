use super::ModelError;
use crate::tensor::{conv_output_extent, Activation, LayerSpec};

pub const LOG_VAR_MIN: f64 = -20.0;
pub const LOG_VAR_MAX: f64 = 20.0;

/// Network shape and loss weights.
///
/// `encoder` maps `[1, s...]` inputs to a flat trunk of width `hidden`;
/// three dense heads read the trunk. `decoder` maps `[d + p]` back to
/// `[1, s...]` and should end in a sigmoid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Spatial extents of one input, e.g. `[32, 32]` or `[16, 16, 16]`.
    pub input_dims: Vec<usize>,
    pub latent_dim: usize,
    pub pose_dim: usize,
    pub beta: f64,
    pub gamma: f64,
    pub hidden: usize,
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub seed: u64,
}

impl ModelConfig {
    /// Default stack: two stride-2 convolutions and a dense trunk, mirrored
    /// by the decoder with transposed convolutions.
    pub fn new(input_dims: &[usize], latent_dim: usize, pose_dim: usize) -> Result<Self, ModelError> {
        Self::with_widths(input_dims, latent_dim, pose_dim, [8, 16], 64)
    }

    pub fn with_widths(
        input_dims: &[usize],
        latent_dim: usize,
        pose_dim: usize,
        channels: [usize; 2],
        hidden: usize,
    ) -> Result<Self, ModelError> {
        if !(input_dims.len() == 2 || input_dims.len() == 3) {
            return Err(ModelError::Config(format!("inputs must be 2D or 3D, got {input_dims:?}")));
        }
        let mut inner = Vec::with_capacity(input_dims.len());
        for &s in input_dims {
            let a = conv_output_extent(s, 4, 2);
            let b = a.and_then(|a| conv_output_extent(a, 3, 2));
            match b {
                Some(b) if (b - 1) * 2 + 3 == a.unwrap() && (a.unwrap() - 1) * 2 + 4 == s => inner.push(b),
                _ => {
                    return Err(ModelError::Config(format!(
                        "input extent {s} does not round-trip through the default stack (try a power of two >= 8)"
                    )))
                }
            }
        }
        let [c1, c2] = channels;
        let flat = c2 * inner.iter().product::<usize>();
        let mut reshape = vec![c2];
        reshape.extend(&inner);
        let encoder = vec![
            LayerSpec::Conv { in_channels: 1, out_channels: c1, kernel: 4, stride: 2 },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Conv { in_channels: c1, out_channels: c2, kernel: 3, stride: 2 },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: flat, outputs: hidden },
            LayerSpec::Activation(Activation::Relu),
        ];
        let decoder = vec![
            LayerSpec::Dense { inputs: latent_dim + pose_dim, outputs: hidden },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Dense { inputs: hidden, outputs: flat },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Reshape(reshape),
            LayerSpec::ConvTranspose { in_channels: c2, out_channels: c1, kernel: 3, stride: 2 },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::ConvTranspose { in_channels: c1, out_channels: 1, kernel: 4, stride: 2 },
            LayerSpec::Activation(Activation::Sigmoid),
        ];
        let cfg = ModelConfig {
            input_dims: input_dims.to_vec(),
            latent_dim,
            pose_dim,
            beta: 1.0,
            gamma: 0.0,
            hidden,
            encoder,
            decoder,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_loss_weights(mut self, beta: f64, gamma: f64) -> Self {
        self.beta = beta;
        self.gamma = gamma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn spatial_rank(&self) -> usize {
        self.input_dims.len()
    }

    /// Input extents including the channel axis.
    pub fn sample_shape(&self) -> Vec<usize> {
        let mut s = vec![1];
        s.extend(&self.input_dims);
        s
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(2..=16).contains(&self.latent_dim) {
            return Err(ModelError::Config(format!("latent_dim must be in [2, 16], got {}", self.latent_dim)));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let mut extents = self.sample_shape();
        for layer in &self.encoder {
            extents = layer.output_extents(&extents)?;
        }
        if extents != [self.hidden] {
            return Err(ModelError::Config(format!("encoder ends at {extents:?}, expected [{}]", self.hidden)));
        }
        let mut extents = vec![self.latent_dim + self.pose_dim];
        for layer in &self.decoder {
            extents = layer.output_extents(&extents)?;
        }
        if extents != self.sample_shape() {
            return Err(ModelError::Config(format!(
                "decoder ends at {extents:?}, expected {:?}",
                self.sample_shape()
            )));
        }
        Ok(())
    }
}
