use super::AffinityError;
use crate::datagen::{gaussian_blur_2d, rotate_2d, Grid};

/// Dynamic range of normalised grid values.
pub const VALUE_RANGE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanDifference {
    /// `(1/N) Σ (a_i − b_i)`.
    pub raw: f64,
    /// `1 − 2|raw| / range`, clamped to `[−1, 1]`.
    pub similarity: f64,
}

pub fn mean_difference(a: &Grid, b: &Grid) -> Result<MeanDifference, AffinityError> {
    if a.dims() != b.dims() {
        return Err(AffinityError::Shape(format!("grid dims differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    let sum: f64 = a.values().iter().zip(b.values()).map(|(&x, &y)| f64::from(x) - f64::from(y)).sum();
    let raw = sum / a.len() as f64;
    Ok(MeanDifference {
        raw,
        similarity: (1.0 - 2.0 * raw.abs() / VALUE_RANGE).clamp(-1.0, 1.0),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest blurred inner product of `a` with `b` rotated by `j · 360° / n` for `j = 0..n`.
fn max_rotated_overlap(blurred_a: &[f64], b: &Grid, sigma: f64, n_rotations: usize) -> f64 {
    (0..n_rotations)
        .map(|j| {
            let angle = 360.0 * j as f64 / n_rotations as f64;
            let rotated = rotate_2d(b, angle);
            dot(blurred_a, &gaussian_blur_2d(&rotated, sigma))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rotation-maximised, normalised overlap of Gaussian-smoothed densities.
///
/// Every foreground pixel acts as a point carrying a Gaussian of width
/// `sigma`; the kernel is the best overlap over `n_rotations` evenly spaced
/// rotations of `b`, divided by the geometric mean of the self-overlaps.
pub fn overlap_kernel(a: &Grid, b: &Grid, sigma: f64, n_rotations: usize) -> Result<f64, AffinityError> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(AffinityError::UnsupportedDims(
            "the overlap kernel is defined for 2D grids; use FSC for volumes".into(),
        ));
    }
    if a.dims() != b.dims() {
        return Err(AffinityError::Shape(format!("grid dims differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    if !(sigma > 0.0) || n_rotations < 4 {
        return Err(AffinityError::Config(format!(
            "overlap kernel needs sigma > 0 and at least 4 rotations, got sigma={sigma}, n={n_rotations}"
        )));
    }
    let ba = gaussian_blur_2d(a, sigma);
    let bb = gaussian_blur_2d(b, sigma);
    let kab = max_rotated_overlap(&ba, b, sigma, n_rotations);
    let kaa = max_rotated_overlap(&ba, a, sigma, n_rotations);
    let kbb = max_rotated_overlap(&bb, b, sigma, n_rotations);
    let norm = (kaa * kbb).sqrt();
    if !(norm > 0.0) {
        return Ok(0.0);
    }
    Ok((kab / norm).clamp(0.0, 1.0))
}
