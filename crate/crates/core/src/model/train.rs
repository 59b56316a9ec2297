use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use super::{AffinityVae, ForwardPass, LossBreakdown, ModelError};
use crate::affinity::AffinityMatrix;
use crate::datagen::Grid;
use crate::rng::{derive_seed, seeded};
use crate::tensor::{Adam, AdamConfig, Tape, Tensor, TensorError, Var};

const SHUFFLE_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const VALIDATION_CHUNK: usize = 64;

pub const EPOCH_LOG_HEADER: &str = "epoch,split,reconstruction,kl,affinity,total";

#[derive(Clone, Copy, Debug)]
pub struct TrainSample<'a> {
    pub grid: &'a Grid,
    pub class: &'a str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Overwritten after every epoch when set.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 10, batch_size: 32, learning_rate: 1e-3, checkpoint: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub steps: u64,
}

impl TrainReport {
    pub fn train_loss(&self, epoch: usize) -> Option<LossBreakdown> {
        self.log.iter().find(|l| l.epoch == epoch && l.split == "train").map(|l| l.loss)
    }
}

pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let mut s = format!("{EPOCH_LOG_HEADER}\n");
    for l in log {
        s += &format!(
            "{},{},{},{},{},{}\n",
            l.epoch, l.split, l.loss.reconstruction, l.loss.kl, l.loss.affinity, l.loss.total
        );
    }
    s
}

/// Tape handles of the loss terms.
#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub reconstruction: Var,
    pub kl: Var,
    pub affinity: Option<Var>,
    pub total: Var,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape, beta: f64, gamma: f64) -> LossBreakdown {
        let aff = self.affinity.map_or(0.0, |a| tape.scalar(a));
        let b = LossBreakdown::combine(tape.scalar(self.reconstruction), tape.scalar(self.kl), aff, beta, gamma);
        debug_assert_eq!(b.total.to_bits(), tape.scalar(self.total).to_bits());
        b
    }
}

impl AffinityVae {
    /// Appends the loss to a recorded pass. `target` is the `[N, N]` table
    /// of affinities between the batch's classes.
    pub fn record_loss(&self, tape: &mut Tape, fp: &ForwardPass, target: Option<Tensor>) -> Result<LossVars, ModelError> {
        let batch = tape.shape(fp.x)[0] as f64;
        let diff = tape.sub(fp.y, fp.x)?;
        let sq = tape.square(diff);
        let sse = tape.sum(sq);
        let reconstruction = tape.scale(sse, 1.0 / batch);

        let one_plus = tape.add_scalar(fp.log_var, 1.0);
        let mu_sq = tape.square(fp.mu);
        let var = tape.exp(fp.log_var);
        let t = tape.sub(one_plus, mu_sq)?;
        let t = tape.sub(t, var)?;
        let s = tape.sum(t);
        let kl = tape.scale(s, -0.5 / batch);

        let weighted_kl = tape.scale(kl, self.config.beta);
        let mut total = tape.add(reconstruction, weighted_kl)?;
        let affinity = match target {
            Some(t) => {
                let a = tape.cosine_l1(fp.mu, t, batch)?;
                let weighted = tape.scale(a, self.config.gamma);
                total = tape.add(total, weighted)?;
                Some(a)
            }
            None => None,
        };
        Ok(LossVars { reconstruction, kl, affinity, total })
    }
}

fn affinity_target(a: &AffinityMatrix, rows: &[usize]) -> Tensor {
    let n = rows.len();
    let data = rows.iter().flat_map(|&i| rows.iter().map(move |&j| a.get(i, j))).collect();
    Tensor::new(vec![n, n], data).expect("square target")
}

/// Splits `0..n` into consecutive batches of `size`; a trailing batch of one
/// joins the previous batch so every batch has at least two samples.
fn batch_bounds(n: usize, size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + size).min(n);
        out.push((start, end));
        start = end;
    }
    if out.len() > 1 && out.last().is_some_and(|&(s, e)| e - s == 1) {
        let (_, e) = out.pop().unwrap();
        out.last_mut().unwrap().1 = e;
    }
    out
}

fn accumulate(acc: &mut [f64; 3], b: &LossBreakdown, weight: f64) {
    acc[0] += b.reconstruction * weight;
    acc[1] += b.kl * weight;
    acc[2] += b.affinity * weight;
}

fn mean_breakdown(acc: [f64; 3], n: f64, beta: f64, gamma: f64) -> LossBreakdown {
    LossBreakdown::combine(acc[0] / n, acc[1] / n, acc[2] / n, beta, gamma)
}

fn affinity_rows(samples: &[TrainSample<'_>], a: Option<&AffinityMatrix>) -> Result<Option<Vec<usize>>, ModelError> {
    let Some(a) = a else { return Ok(None) };
    samples
        .iter()
        .map(|s| a.index_of(s.class).ok_or_else(|| ModelError::Lookup(s.class.to_string())))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Loss of `samples` with `z = μ`, averaged over chunks weighted by size.
pub fn evaluate_loss(
    model: &AffinityVae,
    samples: &[TrainSample<'_>],
    affinity: Option<&AffinityMatrix>,
) -> Result<LossBreakdown, ModelError> {
    let rows = affinity_rows(samples, affinity)?;
    let (beta, gamma) = (model.config.beta, model.config.gamma);
    let mut acc = [0.0; 3];
    for (s, e) in batch_bounds(samples.len(), VALIDATION_CHUNK) {
        let grids: Vec<&Grid> = samples[s..e].iter().map(|t| t.grid).collect();
        let mut tape = Tape::new();
        let fp = model.record(&mut tape, model.batch_tensor(&grids)?, None)?;
        let target = match (&rows, affinity) {
            (Some(r), Some(a)) if e - s >= 2 => Some(affinity_target(a, &r[s..e])),
            _ => None,
        };
        let lv = model.record_loss(&mut tape, &fp, target)?;
        accumulate(&mut acc, &lv.breakdown(&tape, beta, gamma), (e - s) as f64);
    }
    let out = mean_breakdown(acc, samples.len() as f64, beta, gamma);
    out.check_finite()?;
    Ok(out)
}

/// Optimises `model` in place with Adam.
///
/// Each epoch shuffles the training set, takes one step per batch and then
/// logs the mean training loss and the validation loss (decoded from `μ`).
/// The affinity matrix, when given, must cover every training and
/// validation class.
pub fn train(
    model: &mut AffinityVae,
    train_set: &[TrainSample<'_>],
    validation: &[TrainSample<'_>],
    affinity: Option<&AffinityMatrix>,
    cfg: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    train_observed(model, train_set, validation, affinity, cfg, |_, _| {})
}

/// [`train`], calling `on_epoch(epoch, model)` after every epoch.
pub fn train_observed(
    model: &mut AffinityVae,
    train_set: &[TrainSample<'_>],
    validation: &[TrainSample<'_>],
    affinity: Option<&AffinityMatrix>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &AffinityVae),
) -> Result<TrainReport, ModelError> {
    if train_set.len() < 2 {
        return Err(ModelError::Config(format!("need at least 2 training samples, got {}", train_set.len())));
    }
    if cfg.batch_size < 2 {
        return Err(ModelError::Config(format!("batch size must be at least 2, got {}", cfg.batch_size)));
    }
    let rows = affinity_rows(train_set, affinity)?;
    affinity_rows(validation, affinity)?;
    let (beta, gamma) = (model.config.beta, model.config.gamma);
    let mut shuffle_rng = seeded(derive_seed(model.config.seed, SHUFFLE_STREAM));
    let mut noise_rng = seeded(derive_seed(model.config.seed, NOISE_STREAM));
    let adam_cfg = AdamConfig { learning_rate: cfg.learning_rate, ..AdamConfig::default() };
    let mut adam = Adam::new(adam_cfg, &model.params);
    let d = model.config.latent_dim;
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = [0.0; 3];
        for (batch_no, (s, e)) in batch_bounds(order.len(), cfg.batch_size).into_iter().enumerate() {
            let idx = &order[s..e];
            let diverged = |reason: String| ModelError::Divergence { epoch, batch: batch_no + 1, reason };
            let grids: Vec<&Grid> = idx.iter().map(|&i| train_set[i].grid).collect();
            let eps: Vec<f64> = (0..idx.len() * d).map(|_| StandardNormal.sample(&mut noise_rng)).collect();
            let mut tape = Tape::new();
            let fp = model.record(&mut tape, model.batch_tensor(&grids)?, Some(Tensor::new(vec![idx.len(), d], eps)?))?;
            let target = match (&rows, affinity) {
                (Some(r), Some(a)) => {
                    let batch_rows: Vec<usize> = idx.iter().map(|&i| r[i]).collect();
                    Some(affinity_target(a, &batch_rows))
                }
                _ => None,
            };
            let lv = model.record_loss(&mut tape, &fp, target)?;
            let b = lv.breakdown(&tape, beta, gamma);
            b.check_finite().map_err(|e| diverged(e.to_string()))?;
            accumulate(&mut acc, &b, idx.len() as f64);
            let mut grads = tape.backward(lv.total)?;
            let g: Vec<Tensor> = fp.params.iter().map(|&p| grads.take(p)).collect();
            match adam.step(&mut model.params, &g) {
                Ok(()) => {}
                Err(TensorError::NonFiniteGradient(name)) => return Err(diverged(format!("non-finite gradient for {name}"))),
                Err(e) => return Err(e.into()),
            }
        }
        log.push(EpochLog { epoch, split: "train", loss: mean_breakdown(acc, train_set.len() as f64, beta, gamma) });
        if !validation.is_empty() {
            let v = evaluate_loss(model, validation, affinity)
                .map_err(|e| ModelError::Divergence { epoch, batch: 0, reason: format!("validation: {e}") })?;
            log.push(EpochLog { epoch, split: "validation", loss: v });
        }
        if let Some(path) = &cfg.checkpoint {
            model.save(path)?;
        }
        on_epoch(epoch, model);
    }
    Ok(TrainReport { log, steps: adam.step_count() })
}
