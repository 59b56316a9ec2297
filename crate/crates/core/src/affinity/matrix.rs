use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::{fsc_average, mean_difference, overlap_kernel, AffinityError};
use crate::datagen::Grid;

pub const DEFAULT_OVERLAP_SIGMA: f64 = 2.0;
pub const DEFAULT_OVERLAP_ROTATIONS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Metric {
    Fsc,
    MeanDifference,
    Overlap { sigma: f64, rotations: usize },
}

impl Metric {
    pub fn overlap() -> Self {
        Metric::Overlap {
            sigma: DEFAULT_OVERLAP_SIGMA,
            rotations: DEFAULT_OVERLAP_ROTATIONS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Fsc => "fsc",
            Metric::MeanDifference => "mean_difference",
            Metric::Overlap { .. } => "overlap",
        }
    }

    pub fn evaluate(&self, a: &Grid, b: &Grid) -> Result<f64, AffinityError> {
        match *self {
            Metric::Fsc => fsc_average(a, b),
            Metric::MeanDifference => Ok(mean_difference(a, b)?.similarity),
            Metric::Overlap { sigma, rotations } => overlap_kernel(a, b, sigma, rotations),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = AffinityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "fsc" => Ok(Metric::Fsc),
            "mean_difference" | "mean-difference" => Ok(Metric::MeanDifference),
            "overlap" => Ok(Metric::overlap()),
            other => Err(AffinityError::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Symmetric class-by-class similarity table with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityMatrix {
    metric: String,
    roster: Vec<String>,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Validates the three invariants (symmetry, unit diagonal, range).
    pub fn new(metric: &str, roster: Vec<String>, values: Vec<f64>) -> Result<Self, AffinityError> {
        let m = roster.len();
        if values.len() != m * m {
            return Err(AffinityError::Shape(format!("{} values for {m} classes", values.len())));
        }
        for i in 0..m {
            if values[i * m + i] != 1.0 {
                return Err(AffinityError::Shape(format!("diagonal entry {} is {}", roster[i], values[i * m + i])));
            }
            for j in 0..m {
                let v = values[i * m + j];
                if !(-1.0..=1.0).contains(&v) {
                    return Err(AffinityError::Metric {
                        a: roster[i].clone(),
                        b: roster[j].clone(),
                        reason: format!("value {v} outside [-1, 1]"),
                    });
                }
                if v != values[j * m + i] {
                    return Err(AffinityError::Shape(format!("not symmetric at ({}, {})", roster[i], roster[j])));
                }
            }
        }
        Ok(AffinityMatrix {
            metric: metric.to_string(),
            roster,
            values,
        })
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn roster(&self) -> &[String] {
        &self.roster
    }

    pub fn len(&self) -> usize {
        self.roster.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roster.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.roster.iter().position(|c| c == class)
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.get(self.index_of(a)?, self.index_of(b)?))
    }

    /// Row of this matrix for each entry of `classes`, or an error naming
    /// the first class the matrix does not cover.
    pub fn indices_for(&self, classes: &[String]) -> Result<Vec<usize>, AffinityError> {
        classes
            .iter()
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| AffinityError::Config(format!("affinity matrix has no entry for class `{c}`")))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# affinity v1 metric={}\n{}\n", self.metric, self.roster.join(","));
        let m = self.len();
        for i in 0..m {
            let row: Vec<String> = (0..m).map(|j| format!("{:.16e}", self.get(i, j))).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, AffinityError> {
        let fail = |line: usize, reason: String| AffinityError::Format { line, reason };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
        let metric = header
            .strip_prefix("# affinity v1 metric=")
            .ok_or_else(|| fail(1, format!("bad header `{header}`")))?
            .trim()
            .to_string();
        let names = lines.next().ok_or_else(|| fail(2, "missing class names".into()))?;
        let roster: Vec<String> = names.split(',').map(|s| s.trim().to_string()).collect();
        if roster.iter().any(|s| s.is_empty()) {
            return Err(fail(2, "empty class name".into()));
        }
        let m = roster.len();
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            let line_no = i + 3;
            let row = lines.next().ok_or_else(|| fail(line_no, "missing row".into()))?;
            let parsed: Result<Vec<f64>, _> = row.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let parsed = parsed.map_err(|e| fail(line_no, e.to_string()))?;
            if parsed.len() != m {
                return Err(fail(line_no, format!("expected {m} values, found {}", parsed.len())));
            }
            values.extend(parsed);
        }
        if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
            return Err(fail(m + 3, format!("unexpected trailing line `{extra}`")));
        }
        AffinityMatrix::new(&metric, roster, values)
    }

    pub fn write(&self, path: &Path) -> Result<(), AffinityError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn read_affinity(path: &Path) -> Result<AffinityMatrix, AffinityError> {
    AffinityMatrix::from_text(&std::fs::read_to_string(path)?)
}

/// Pairwise metric over canonical class exemplars. Each off-diagonal entry
/// is the mean of both argument orders; the diagonal is fixed to 1.
pub fn build_affinity(classes: &[(String, Grid)], metric: Metric) -> Result<AffinityMatrix, AffinityError> {
    let m = classes.len();
    if m < 2 {
        return Err(AffinityError::Config(format!("need at least 2 classes, got {m}")));
    }
    let mut values = vec![1.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let (na, ga) = &classes[i];
            let (nb, gb) = &classes[j];
            let pair_err = |reason: String| AffinityError::Metric {
                a: na.clone(),
                b: nb.clone(),
                reason,
            };
            let ab = metric.evaluate(ga, gb).map_err(|e| pair_err(e.to_string()))?;
            let ba = metric.evaluate(gb, ga).map_err(|e| pair_err(e.to_string()))?;
            let v = 0.5 * (ab + ba);
            if !v.is_finite() {
                return Err(pair_err(format!("non-finite value {v}")));
            }
            let v = v.clamp(-1.0, 1.0);
            values[i * m + j] = v;
            values[j * m + i] = v;
        }
    }
    let roster = classes.iter().map(|(n, _)| n.clone()).collect();
    AffinityMatrix::new(metric.name(), roster, values)
}
