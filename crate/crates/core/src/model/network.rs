use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{ModelConfig, ModelError, LOG_VAR_MAX, LOG_VAR_MIN};
use crate::datagen::Grid;
use crate::rng::{derive_seed, seeded};
use crate::tensor::{
    decode_checkpoint, encode_checkpoint, CheckpointRecord, LayerSpec, Parameter, RecordKind, Tape, Tensor, Var,
};

const INIT_STREAM: u64 = 0;
const CHUNK: usize = 64;

/// Encoder output for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub mu: Vec<f64>,
    /// Clamped to `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub log_var: Vec<f64>,
    pub pose: Vec<f64>,
    /// `mu + exp(log_var / 2) · eps`; equal to `mu` until reparameterised.
    pub sampled_z: Vec<f64>,
    pub eps: Vec<f64>,
}

impl LatentCode {
    /// Draws `eps ~ N(0, I)` and sets `sampled_z`.
    pub fn reparameterize(&self, rng: &mut impl Rng) -> LatentCode {
        let eps: Vec<f64> = self.mu.iter().map(|_| rng.sample(StandardNormal)).collect();
        self.with_eps(eps)
    }

    pub fn with_eps(&self, eps: Vec<f64>) -> LatentCode {
        let sampled_z = self
            .mu
            .iter()
            .zip(&self.log_var)
            .zip(&eps)
            .map(|((m, lv), e)| m + (0.5 * lv.clamp(LOG_VAR_MIN, LOG_VAR_MAX)).exp() * e)
            .collect();
        LatentCode { sampled_z, eps, ..self.clone() }
    }
}

/// Tape handles of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub params: Vec<Var>,
    pub x: Var,
    pub mu: Var,
    pub log_var: Var,
    pub pose: Option<Var>,
    pub z: Var,
    pub y: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffinityVae {
    pub config: ModelConfig,
    pub params: Vec<Parameter>,
    kinds: Vec<RecordKind>,
}

fn head_specs(cfg: &ModelConfig) -> Vec<(&'static str, LayerSpec)> {
    let mut heads = vec![
        ("mu", LayerSpec::Dense { inputs: cfg.hidden, outputs: cfg.latent_dim }),
        ("log_var", LayerSpec::Dense { inputs: cfg.hidden, outputs: cfg.latent_dim }),
    ];
    if cfg.pose_dim > 0 {
        heads.push(("pose", LayerSpec::Dense { inputs: cfg.hidden, outputs: cfg.pose_dim }));
    }
    heads
}

/// Named layers in parameter order: encoder, heads, decoder.
fn parameter_layout(cfg: &ModelConfig) -> Vec<(String, RecordKind, Vec<usize>)> {
    let rank = cfg.spatial_rank();
    let mut out = Vec::new();
    let mut push = |prefix: String, layer: &LayerSpec| {
        for (i, (kind, shape)) in layer.parameter_shapes(rank).into_iter().enumerate() {
            let suffix = if i == 0 { "weight" } else { "bias" };
            out.push((format!("{prefix}.{suffix}"), kind, shape));
        }
    };
    for (i, l) in cfg.encoder.iter().enumerate() {
        push(format!("encoder.{i}"), l);
    }
    for (name, l) in head_specs(cfg) {
        push(name.to_string(), &l);
    }
    for (i, l) in cfg.decoder.iter().enumerate() {
        push(format!("decoder.{i}"), l);
    }
    out
}

fn fan_in(kind: RecordKind, shape: &[usize]) -> usize {
    match kind {
        RecordKind::DenseWeight => shape[0],
        // kernels are [out, in, k...] / [in, out, k...]; both use dim 1 times the window
        RecordKind::ConvKernel | RecordKind::ConvTransposeKernel => shape[1..].iter().product(),
        _ => 0,
    }
}

impl AffinityVae {
    /// Weights and biases drawn from `U(−1/√fan_in, 1/√fan_in)` of the
    /// owning layer, in parameter order, from the config seed.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = seeded(derive_seed(config.seed, INIT_STREAM));
        let layout = parameter_layout(&config);
        let mut params = Vec::with_capacity(layout.len());
        let mut kinds = Vec::with_capacity(layout.len());
        let mut bound = 1.0;
        for (name, kind, shape) in layout {
            let fi = fan_in(kind, &shape);
            if fi > 0 {
                bound = 1.0 / (fi as f64).sqrt();
            }
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            params.push(Parameter { name, value: Tensor::new(shape, data)? });
            kinds.push(kind);
        }
        Ok(AffinityVae { config, params, kinds })
    }

    /// Sets the bias of the final decoder layer to `logit(mean)`, so an
    /// untrained decoder already outputs the average intensity of sparse data.
    pub fn init_output_bias(&mut self, mean: f64) {
        let m = mean.clamp(1e-4, 1.0 - 1e-4);
        let logit = (m / (1.0 - m)).ln();
        if let Some(bias) = self.params.last_mut() {
            bias.value.data_mut().iter_mut().for_each(|b| *b = logit);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Stacks grids into a `[B, 1, s...]` tensor after checking their extents.
    pub fn batch_tensor(&self, grids: &[&Grid]) -> Result<Tensor, ModelError> {
        let mut data = Vec::with_capacity(grids.len() * grids.first().map_or(0, |g| g.len()));
        for g in grids {
            if g.dims() != self.config.input_dims.as_slice() {
                return Err(ModelError::Shape(format!(
                    "grid dims {:?} do not match model input {:?}",
                    g.dims(),
                    self.config.input_dims
                )));
            }
            data.extend(g.values().iter().map(|&v| f64::from(v)));
        }
        let mut shape = vec![grids.len()];
        shape.extend(self.config.sample_shape());
        Ok(Tensor::new(shape, data)?)
    }

    fn apply_stack(tape: &mut Tape, layers: &[LayerSpec], params: &[Var], cursor: &mut usize, mut x: Var, rank: usize) -> Result<Var, ModelError> {
        for layer in layers {
            let n = layer.parameter_shapes(rank).len();
            x = layer.apply(tape, x, &params[*cursor..*cursor + n])?;
            *cursor += n;
        }
        Ok(x)
    }

    /// Records a full pass on `tape`. With `eps` (`[B, d]`) the decoder
    /// reads `z = μ + exp(log σ² / 2) ⊙ eps`; without it, `z = μ`.
    pub fn record(&self, tape: &mut Tape, x: Tensor, eps: Option<Tensor>) -> Result<ForwardPass, ModelError> {
        let rank = self.config.spatial_rank();
        let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone())).collect();
        let x = tape.leaf(x);
        let mut cursor = 0;
        let trunk = Self::apply_stack(tape, &self.config.encoder, &params, &mut cursor, x, rank)?;
        let mu = tape.dense(trunk, params[cursor], params[cursor + 1])?;
        let raw_lv = tape.dense(trunk, params[cursor + 2], params[cursor + 3])?;
        cursor += 4;
        let log_var = tape.clamp(raw_lv, LOG_VAR_MIN, LOG_VAR_MAX);
        let pose = if self.config.pose_dim > 0 {
            let p = tape.dense(trunk, params[cursor], params[cursor + 1])?;
            cursor += 2;
            Some(p)
        } else {
            None
        };
        let z = match eps {
            Some(eps) => {
                let half = tape.scale(log_var, 0.5);
                let std = tape.exp(half);
                let e = tape.leaf(eps);
                let noise = tape.mul(std, e)?;
                tape.add(mu, noise)?
            }
            None => mu,
        };
        let dec_in = match pose {
            Some(p) => tape.concat_cols(z, p)?,
            None => z,
        };
        let y = Self::apply_stack(tape, &self.config.decoder, &params, &mut cursor, dec_in, rank)?;
        Ok(ForwardPass { params, x, mu, log_var, pose, z, y })
    }

    /// Encodes grids to latent codes (`sampled_z = mu`, `eps = 0`).
    pub fn encode(&self, grids: &[&Grid]) -> Result<Vec<LatentCode>, ModelError> {
        let mut out = Vec::with_capacity(grids.len());
        for chunk in grids.chunks(CHUNK) {
            let mut tape = Tape::new();
            let x = self.batch_tensor(chunk)?;
            let fp = self.record(&mut tape, x, None)?;
            out.extend(self.codes_from(&tape, &fp));
        }
        Ok(out)
    }

    pub(crate) fn codes_from(&self, tape: &Tape, fp: &ForwardPass) -> Vec<LatentCode> {
        let b = tape.shape(fp.mu)[0];
        let d = self.config.latent_dim;
        (0..b)
            .map(|i| {
                let mu = tape.value(fp.mu).row(i).to_vec();
                LatentCode {
                    log_var: tape.value(fp.log_var).row(i).to_vec(),
                    pose: fp.pose.map_or_else(Vec::new, |p| tape.value(p).row(i).to_vec()),
                    sampled_z: mu.clone(),
                    eps: vec![0.0; d],
                    mu,
                }
            })
            .collect()
    }

    /// Decodes `(z, pose)` pairs to grids.
    pub fn decode_batch(&self, inputs: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<Grid>, ModelError> {
        let width = self.config.latent_dim + self.config.pose_dim;
        let rank = self.config.spatial_rank();
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(CHUNK) {
            let mut rows = Vec::with_capacity(chunk.len() * width);
            for (z, pose) in chunk {
                if z.len() != self.config.latent_dim || pose.len() != self.config.pose_dim {
                    return Err(ModelError::Shape(format!(
                        "decoder expects z[{}] and pose[{}], got z[{}] and pose[{}]",
                        self.config.latent_dim,
                        self.config.pose_dim,
                        z.len(),
                        pose.len()
                    )));
                }
                rows.extend(z);
                rows.extend(pose);
            }
            let mut tape = Tape::new();
            let params: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.value.clone())).collect();
            let input = tape.leaf(Tensor::new(vec![chunk.len(), width], rows)?);
            let mut cursor = self.decoder_offset();
            let y = Self::apply_stack(&mut tape, &self.config.decoder, &params, &mut cursor, input, rank)?;
            let per = tape.value(y).len() / chunk.len();
            for i in 0..chunk.len() {
                let vals = &tape.value(y).data()[i * per..(i + 1) * per];
                out.push(Grid::from_f64(self.config.input_dims.clone(), vals).map_err(|e| ModelError::Shape(e.to_string()))?);
            }
        }
        Ok(out)
    }

    pub fn decode(&self, z: &[f64], pose: &[f64]) -> Result<Grid, ModelError> {
        Ok(self.decode_batch(&[(z.to_vec(), pose.to_vec())])?.remove(0))
    }

    fn decoder_offset(&self) -> usize {
        let rank = self.config.spatial_rank();
        let enc: usize = self.config.encoder.iter().map(|l| l.parameter_shapes(rank).len()).sum();
        enc + 2 * head_specs(&self.config).len()
    }

    pub fn to_records(&self) -> Vec<CheckpointRecord> {
        self.params
            .iter()
            .zip(&self.kinds)
            .map(|(p, &kind)| CheckpointRecord { kind, tensor: p.value.clone() })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_checkpoint(&self.to_records())
    }

    /// Restores weights for `config`; every record must match the expected
    /// kind and shape.
    pub fn from_bytes(config: ModelConfig, bytes: &[u8]) -> Result<Self, ModelError> {
        let mut model = AffinityVae::new(config)?;
        let records = decode_checkpoint(bytes)?;
        if records.len() != model.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds {} tensors, model expects {}",
                records.len(),
                model.params.len()
            )));
        }
        for ((p, &kind), r) in model.params.iter_mut().zip(&model.kinds).zip(records) {
            if r.kind != kind || r.tensor.shape() != p.value.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "{}: expected {:?} {:?}, found {:?} {:?}",
                    p.name,
                    kind,
                    p.value.shape(),
                    r.kind,
                    r.tensor.shape()
                )));
            }
            p.value = r.tensor;
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(config: ModelConfig, path: &Path) -> Result<Self, ModelError> {
        Self::from_bytes(config, &std::fs::read(path)?)
    }
}
