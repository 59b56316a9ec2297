use super::{LatentCode, ModelError};
use crate::affinity::AffinityMatrix;

/// The three loss terms and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub affinity: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `total = reconstruction + beta·kl + gamma·affinity`, summed left to right.
    pub fn combine(reconstruction: f64, kl: f64, affinity: f64, beta: f64, gamma: f64) -> Self {
        LossBreakdown {
            reconstruction,
            kl,
            affinity,
            total: reconstruction + beta * kl + gamma * affinity,
        }
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        for (component, v) in [
            ("reconstruction", self.reconstruction),
            ("kl", self.kl),
            ("affinity", self.affinity),
            ("total", self.total),
        ] {
            if !v.is_finite() {
                return Err(ModelError::Loss { component });
            }
        }
        Ok(())
    }
}

/// Batch mean of per-sample sums of squared differences.
pub fn reconstruction_term(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let total: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum();
    total / x.len() as f64
}

/// Gaussian KL to the unit prior, summed over latent dimensions and
/// averaged over the batch. Pose is not part of the code's distribution.
pub fn kl_term(codes: &[LatentCode]) -> f64 {
    let total: f64 = codes
        .iter()
        .map(|c| {
            -0.5 * c
                .mu
                .iter()
                .zip(&c.log_var)
                .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
                .sum::<f64>()
        })
        .sum();
    total / codes.len() as f64
}

const COSINE_EPS: f64 = 1e-12;

/// `(1/N) Σ_{i,j} |A[c_i, c_j] − cos(μ_i, μ_j)|` over all ordered pairs,
/// diagonal included. `class_ids` index rows of `a`.
pub fn affinity_term(mus: &[Vec<f64>], class_ids: &[usize], a: &AffinityMatrix) -> Result<f64, ModelError> {
    if mus.len() != class_ids.len() {
        return Err(ModelError::Shape(format!("{} codes but {} class ids", mus.len(), class_ids.len())));
    }
    if let Some(&bad) = class_ids.iter().find(|&&c| c >= a.len()) {
        return Err(ModelError::Lookup(format!("#{bad}")));
    }
    let norms: Vec<f64> = mus.iter().map(|m| m.iter().map(|v| v * v).sum::<f64>().sqrt().max(COSINE_EPS)).collect();
    let n = mus.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = mus[i].iter().zip(&mus[j]).map(|(p, q)| p * q).sum();
            let cos = dot / (norms[i] * norms[j]);
            total += (a.get(class_ids[i], class_ids[j]) - cos).abs();
        }
    }
    Ok(total / n as f64)
}

/// Loss of a decoded batch from plain values. `affinity` is skipped (and
/// reported as 0) when `None`.
pub fn loss_breakdown(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    codes: &[LatentCode],
    affinity: Option<(&[usize], &AffinityMatrix)>,
    beta: f64,
    gamma: f64,
) -> Result<LossBreakdown, ModelError> {
    let recon = reconstruction_term(x, y);
    let kl = kl_term(codes);
    let aff = match affinity {
        Some((ids, a)) => {
            let mus: Vec<Vec<f64>> = codes.iter().map(|c| c.mu.clone()).collect();
            affinity_term(&mus, ids, a)?
        }
        None => 0.0,
    };
    let out = LossBreakdown::combine(recon, kl, aff, beta, gamma);
    out.check_finite()?;
    Ok(out)
}
