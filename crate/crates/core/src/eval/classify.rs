use super::{canonical_mean, euclidean, EvalError, LatentEntry, LatentMap};
use crate::datagen::Split;

/// Training entries sorted by distance to `query` (ties by class id), truncated to `k`.
fn neighbours<'a>(map: &'a LatentMap, query: &[f64], k: usize) -> Result<Vec<(f64, &'a LatentEntry)>, EvalError> {
    let mut all: Vec<(f64, &LatentEntry)> = map.train().map(|e| (euclidean(&e.mu, query), e)).collect();
    if all.is_empty() {
        return Err(EvalError::State("latent map has no training entries".into()));
    }
    if k == 0 {
        return Err(EvalError::Config("k must be at least 1".into()));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.class_id.cmp(&b.1.class_id)));
    all.truncate(k);
    Ok(all)
}

/// Majority label of the `k` nearest training entries. Ties go to the
/// class with the smallest summed neighbour distance, then to roster order.
pub fn knn_hard(map: &LatentMap, query: &[f64], k: usize) -> Result<usize, EvalError> {
    let nn = neighbours(map, query, k)?;
    let mut votes = vec![(0usize, 0.0f64); map.roster.len()];
    for (d, e) in &nn {
        votes[e.class_id].0 += 1;
        votes[e.class_id].1 += d;
    }
    let best = (0..votes.len())
        .filter(|&c| votes[c].0 > 0)
        .min_by(|&a, &b| {
            votes[b].0
                .cmp(&votes[a].0)
                .then(votes[a].1.total_cmp(&votes[b].1))
                .then(a.cmp(&b))
        })
        .expect("at least one neighbour");
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftVote {
    /// Fraction of neighbours per roster class.
    pub probabilities: Vec<f64>,
    /// Neighbours actually used; smaller than requested when the map is small.
    pub k: usize,
}

impl SoftVote {
    /// Most probable class, ties to roster order.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = c;
            }
        }
        best
    }
}

/// Class fractions among the `k` nearest training entries. `k` is reduced
/// to the number of training entries when larger.
pub fn knn_soft(map: &LatentMap, query: &[f64], k: usize) -> Result<SoftVote, EvalError> {
    let nn = neighbours(map, query, k)?;
    let mut counts = vec![0usize; map.roster.len()];
    for (_, e) in &nn {
        counts[e.class_id] += 1;
    }
    let used = nn.len();
    Ok(SoftVote {
        probabilities: counts.iter().map(|&c| c as f64 / used as f64).collect(),
        k: used,
    })
}

/// Per-class axis-aligned boxes `mean ± 2σ` fitted on training entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassBoxes {
    /// `(class_id, mean, std)` for classes with at least two entries.
    pub boxes: Vec<(usize, Vec<f64>, Vec<f64>)>,
    /// Classes skipped because σ is undefined for a single entry.
    pub excluded: Vec<usize>,
}

impl ClassBoxes {
    pub fn fit(map: &LatentMap) -> Result<Self, EvalError> {
        let mut boxes = Vec::new();
        let mut excluded = Vec::new();
        for c in map.seen_classes() {
            let mut members: Vec<&[f64]> = map.train().filter(|e| e.class_id == c).map(|e| e.mu.as_slice()).collect();
            if members.len() < 2 {
                excluded.push(c);
                continue;
            }
            let mean = canonical_mean(&mut members);
            let n = members.len() as f64;
            let std = (0..mean.len())
                .map(|j| (members.iter().map(|m| (m[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
                .collect();
            boxes.push((c, mean, std));
        }
        if boxes.is_empty() {
            return Err(EvalError::State("no class has two or more training entries".into()));
        }
        Ok(ClassBoxes { boxes, excluded })
    }

    /// Every class whose box contains `query`, in roster order.
    pub fn assign(&self, query: &[f64]) -> Vec<usize> {
        self.boxes
            .iter()
            .filter(|(_, mean, std)| (0..mean.len()).all(|j| (query[j] - mean[j]).abs() <= 2.0 * std[j]))
            .map(|(c, _, _)| *c)
            .collect()
    }

    /// Member of `assign(query)` with the nearest mean, or `None`.
    pub fn assign_one(&self, query: &[f64]) -> Option<usize> {
        let inside = self.assign(query);
        self.boxes
            .iter()
            .filter(|(c, _, _)| inside.contains(c))
            .min_by(|a, b| euclidean(&a.1, query).total_cmp(&euclidean(&b.1, query)))
            .map(|(c, _, _)| *c)
    }
}

/// Classes whose training `mean ± 2σ` box contains `query` on every axis.
pub fn two_sigma_assign(map: &LatentMap, query: &[f64]) -> Result<Vec<usize>, EvalError> {
    Ok(ClassBoxes::fit(map)?.assign(query))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classifier {
    KnnHard { k: usize },
    KnnSoft { k: usize },
    /// Queries inside several boxes take the nearest mean; queries in none
    /// are counted in an extra `unassigned` column.
    TwoSigma,
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::KnnHard { .. } => "knn_hard",
            Classifier::KnnSoft { .. } => "knn_soft",
            Classifier::TwoSigma => "two_sigma",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionMatrix {
    /// True classes present among the queries (roster order).
    pub rows: Vec<String>,
    /// Predicted classes: seen classes, plus `unassigned` for the 2σ rule.
    pub columns: Vec<String>,
    pub counts: Vec<Vec<usize>>,
    /// Correct predictions over queries whose true class is seen.
    pub accuracy: f64,
}

impl ConfusionMatrix {
    pub fn row(&self, class: &str) -> Option<&[usize]> {
        self.rows.iter().position(|r| r == class).map(|i| self.counts[i].as_slice())
    }

    /// Column label with the largest count in a row, ties to column order.
    pub fn row_argmax(&self, class: &str) -> Option<&str> {
        let row = self.row(class)?;
        let mut best = 0;
        for (j, &c) in row.iter().enumerate() {
            if c > row[best] {
                best = j;
            }
        }
        Some(&self.columns[best])
    }
}

pub const UNASSIGNED: &str = "unassigned";

/// Classifies every query against the map's training entries.
pub fn confusion_matrix(map: &LatentMap, queries: &[&LatentEntry], classifier: Classifier) -> Result<ConfusionMatrix, EvalError> {
    let seen = map.seen_classes();
    let mut columns: Vec<String> = seen.iter().map(|&c| map.roster[c].clone()).collect();
    if classifier == Classifier::TwoSigma {
        columns.push(UNASSIGNED.into());
    }
    let mut present = vec![false; map.roster.len()];
    for q in queries {
        present[q.class_id] = true;
    }
    let row_ids: Vec<usize> = (0..map.roster.len()).filter(|&c| present[c]).collect();
    let mut counts = vec![vec![0usize; columns.len()]; row_ids.len()];
    let boxes = match classifier {
        Classifier::TwoSigma => Some(ClassBoxes::fit(map)?),
        _ => None,
    };
    let (mut correct, mut total_seen) = (0usize, 0usize);
    for q in queries {
        let predicted = match classifier {
            Classifier::KnnHard { k } => Some(knn_hard(map, &q.mu, k)?),
            Classifier::KnnSoft { k } => Some(knn_soft(map, &q.mu, k)?.argmax()),
            Classifier::TwoSigma => boxes.as_ref().unwrap().assign_one(&q.mu),
        };
        let col = match predicted {
            Some(p) => seen.iter().position(|&s| s == p).expect("prediction is a seen class"),
            None => columns.len() - 1,
        };
        let row = row_ids.iter().position(|&r| r == q.class_id).unwrap();
        counts[row][col] += 1;
        if seen.contains(&q.class_id) && q.split != Split::Unseen {
            total_seen += 1;
            if predicted == Some(q.class_id) {
                correct += 1;
            }
        }
    }
    Ok(ConfusionMatrix {
        rows: row_ids.iter().map(|&c| map.roster[c].clone()).collect(),
        columns,
        counts,
        accuracy: if total_seen == 0 { 0.0 } else { correct as f64 / total_seen as f64 },
    })
}
