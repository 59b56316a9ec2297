use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};

use super::{EvalError, LatentMap};
use crate::datagen::Split;
use crate::rng::seeded;

pub const TSNE_MAX_POINTS: usize = 2000;

/// Projection onto the two leading principal components. Each component is
/// sign-fixed so its largest-magnitude loading is positive.
pub fn pca(rows: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, EvalError> {
    if rows.len() < 3 {
        return Err(EvalError::Size(format!("embedding needs at least 3 points, got {}", rows.len())));
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    cov /= n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let axes: Vec<Vec<f64>> = (0..2)
        .map(|c| {
            if c >= d {
                return vec![0.0; d];
            }
            let v = eig.eigenvectors.column(order[c]);
            let mut big = 0;
            for i in 0..d {
                if v[i].abs() > v[big].abs() {
                    big = i;
                }
            }
            let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
            (0..d).map(|i| sign * v[i]).collect()
        })
        .collect();
    Ok(rows
        .iter()
        .map(|r| {
            let p = |axis: &Vec<f64>| (0..d).map(|i| (r[i] - mean[i]) * axis[i]).sum::<f64>();
            [p(&axes[0]), p(&axes[1])]
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

/// Row of conditional probabilities `p_{j|i}` whose entropy matches
/// `ln(perplexity)`, found by bisection on the precision.
fn conditional_row(dist2: &[f64], i: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let (mut lo, mut hi, mut beta) = (0.0f64, f64::INFINITY, 1.0f64);
    let mut p = vec![0.0; dist2.len()];
    for _ in 0..200 {
        let min = dist2.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).fold(f64::INFINITY, f64::min);
        let mut sum = 0.0;
        for (j, &d) in dist2.iter().enumerate() {
            p[j] = if j == i { 0.0 } else { (-(d - min) * beta).exp() };
            sum += p[j];
        }
        let mut entropy = 0.0;
        for (j, &d) in dist2.iter().enumerate() {
            if j != i {
                p[j] /= sum;
                entropy += beta * (d - min) * p[j];
            }
        }
        entropy += sum.ln();
        let diff = entropy - target;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    p
}

/// Exact t-SNE. Perplexity is lowered to `(n − 1) / 3` for small inputs.
pub fn tsne(rows: &[Vec<f64>], cfg: &TsneConfig) -> Result<Vec<[f64; 2]>, EvalError> {
    let n = rows.len();
    if n < 3 {
        return Err(EvalError::Size(format!("embedding needs at least 3 points, got {n}")));
    }
    if n > TSNE_MAX_POINTS {
        return Err(EvalError::Size(format!("exact t-SNE is capped at {TSNE_MAX_POINTS} points, got {n}; use pca")));
    }
    let perplexity = cfg.perplexity.min((n - 1) as f64 / 3.0).max(1.0);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut p = vec![0.0; n * n];
    let mut dist2 = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            dist2[j] = sq(&rows[i], &rows[j]);
        }
        let row = conditional_row(&dist2, i, perplexity);
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            p[i * n + j] = s;
            p[j * n + i] = s;
        }
        p[i * n + i] = 0.0;
    }

    let mut rng = seeded(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n).map(|_| [init.sample(&mut rng), init.sample(&mut rng)]).collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut q = vec![0.0; n * n];
    for it in 0..cfg.iterations {
        let exaggeration = if it < cfg.exaggeration_iterations { cfg.exaggeration } else { 1.0 };
        let momentum = if it < cfg.exaggeration_iterations { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                z += 2.0 * w;
            }
        }
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i * n + j];
                let coeff = 4.0 * (exaggeration * p[i * n + j] - w / z) * w;
                grad[0] += coeff * (y[i][0] - y[j][0]);
                grad[1] += coeff * (y[i][1] - y[j][1]);
            }
            for a in 0..2 {
                let same_sign = (grad[a] > 0.0) == (velocity[i][a] > 0.0);
                gains[i][a] = if same_sign { (gains[i][a] * 0.8f64).max(0.01) } else { gains[i][a] + 0.2 };
                velocity[i][a] = momentum * velocity[i][a] - cfg.learning_rate * gains[i][a] * grad[a];
            }
        }
        for i in 0..n {
            y[i][0] += velocity[i][0];
            y[i][1] += velocity[i][1];
        }
        let cx = y.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        let cy = y.iter().map(|v| v[1]).sum::<f64>() / n as f64;
        for v in &mut y {
            v[0] -= cx;
            v[1] -= cy;
        }
    }
    Ok(y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMethod {
    Pca,
    Tsne,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedRow {
    pub x: f64,
    pub y: f64,
    pub class: String,
    pub split: Split,
}

/// 2D embedding of every μ in the map.
pub fn embed_2d(map: &LatentMap, method: EmbedMethod, seed: u64) -> Result<Vec<EmbedRow>, EvalError> {
    let rows: Vec<Vec<f64>> = map.entries.iter().map(|e| e.mu.clone()).collect();
    let coords = match method {
        EmbedMethod::Pca => pca(&rows)?,
        EmbedMethod::Tsne => tsne(&rows, &TsneConfig { seed, ..TsneConfig::default() })?,
    };
    Ok(map
        .entries
        .iter()
        .zip(coords)
        .map(|(e, [x, y])| EmbedRow { x, y, class: map.roster[e.class_id].clone(), split: e.split })
        .collect())
}
