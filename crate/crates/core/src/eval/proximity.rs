use super::{canonical_mean, euclidean, EvalError, LatentMap};
use crate::datagen::Split;

/// Centroid distances between classes, scaled so the largest is 100.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityMatrix {
    pub roster: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl ProximityMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.roster.iter().position(|r| r == a)?;
        let j = self.roster.iter().position(|r| r == b)?;
        Some(self.values[i][j])
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let m = self.roster.len();
        if m < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    sum += self.values[i][j];
                }
            }
        }
        sum / (m * (m - 1)) as f64
    }
}

/// Centroid of every class: training entries for seen classes, all entries
/// for classes that only occur in the unseen split. Roster order.
pub(crate) fn class_centroids(map: &LatentMap) -> Vec<(usize, Vec<f64>)> {
    let seen = map.seen_classes();
    (0..map.roster.len())
        .filter_map(|c| {
            let mut members: Vec<&[f64]> = if seen.contains(&c) {
                map.train().filter(|e| e.class_id == c).map(|e| e.mu.as_slice()).collect()
            } else {
                map.split(Split::Unseen).filter(|e| e.class_id == c).map(|e| e.mu.as_slice()).collect()
            };
            (!members.is_empty()).then(|| (c, canonical_mean(&mut members)))
        })
        .collect()
}

pub fn proximity_matrix(map: &LatentMap) -> Result<ProximityMatrix, EvalError> {
    if map.seen_classes().len() < 2 {
        return Err(EvalError::State("proximity matrix needs at least 2 training classes".into()));
    }
    let centroids = class_centroids(map);
    let m = centroids.len();
    let mut values = vec![vec![0.0; m]; m];
    let mut max: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let d = euclidean(&centroids[i].1, &centroids[j].1);
            values[i][j] = d;
            values[j][i] = d;
            max = max.max(d);
        }
    }
    if max > 0.0 {
        for row in &mut values {
            for v in row.iter_mut() {
                *v = *v / max * 100.0;
            }
        }
    }
    Ok(ProximityMatrix {
        roster: centroids.iter().map(|(c, _)| map.roster[*c].clone()).collect(),
        values,
    })
}
