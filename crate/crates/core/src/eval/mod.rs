//! Latent-space evaluation: neighbour classifiers, 2σ boxes, confusion and
//! proximity matrices, decoder interpolation, 2D embeddings and their
//! CSV/SVG export.

mod classify;
mod embed;
mod export;
mod interp;
mod proximity;

pub use classify::{confusion_matrix, knn_hard, knn_soft, two_sigma_assign, ClassBoxes, Classifier, ConfusionMatrix, SoftVote};
pub use embed::{embed_2d, pca, tsne, EmbedMethod, EmbedRow, TsneConfig, TSNE_MAX_POINTS};
pub use export::{embedding_csv, embedding_svg, labelled_matrix_csv};
pub use interp::{best_matching_angle, corner_interpolation, latent_traversal, pearson, pose_sweep, PoseSweep};
pub use proximity::{proximity_matrix, ProximityMatrix};

use thiserror::Error;

use crate::datagen::{Grid, LabelledSample, Split};
use crate::model::{AffinityVae, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("state error: {0}")]
    State(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("size error: {0}")]
    Size(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentEntry {
    pub mu: Vec<f64>,
    pub pose: Vec<f64>,
    /// Index into [`LatentMap::roster`].
    pub class_id: usize,
    pub split: Split,
}

/// Encoded samples used as a reference space. Only `Train` entries are
/// used for fitting (neighbours, boxes, seen-class centroids).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentMap {
    pub roster: Vec<String>,
    pub entries: Vec<LatentEntry>,
    pub source: String,
}

impl LatentMap {
    pub fn new(roster: Vec<String>, entries: Vec<LatentEntry>, source: &str) -> Result<Self, EvalError> {
        if let Some(first) = entries.first() {
            let d = first.mu.len();
            if let Some(bad) = entries.iter().find(|e| e.mu.len() != d) {
                return Err(EvalError::State(format!("mixed latent widths {d} and {}", bad.mu.len())));
            }
        }
        if let Some(bad) = entries.iter().find(|e| e.class_id >= roster.len()) {
            return Err(EvalError::Index(format!("class id {} outside roster of {}", bad.class_id, roster.len())));
        }
        Ok(LatentMap { roster, entries, source: source.to_string() })
    }

    /// Encodes every sample with `model` (using μ, no sampling).
    pub fn encode(model: &AffinityVae, samples: &[LabelledSample], roster: &[String], source: &str) -> Result<Self, EvalError> {
        let grids: Vec<&Grid> = samples.iter().map(|s| &s.grid).collect();
        let codes = model.encode(&grids)?;
        let entries = samples
            .iter()
            .zip(codes)
            .map(|(s, c)| LatentEntry { mu: c.mu, pose: c.pose, class_id: s.class_id, split: s.split })
            .collect();
        LatentMap::new(roster.to_vec(), entries, source)
    }

    pub fn latent_dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.mu.len())
    }

    pub fn train(&self) -> impl Iterator<Item = &LatentEntry> {
        self.entries.iter().filter(|e| e.split == Split::Train)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LatentEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Classes with at least one training entry, in roster order.
    pub fn seen_classes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.roster.len()];
        for e in self.train() {
            seen[e.class_id] = true;
        }
        (0..self.roster.len()).filter(|&c| seen[c]).collect()
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean of vectors summed in a canonical order, so the result does not
/// depend on the order the vectors were supplied in.
pub(crate) fn canonical_mean(vectors: &mut [&[f64]]) -> Vec<f64> {
    vectors.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let d = vectors.first().map_or(0, |v| v.len());
    let mut sum = vec![0.0; d];
    for v in vectors.iter() {
        for (s, x) in sum.iter_mut().zip(v.iter()) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    sum.iter().map(|s| s / n).collect()
}
