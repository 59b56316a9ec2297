use super::EvalError;
use crate::datagen::{rotate_binary, Grid};
use crate::model::{AffinityVae, LatentCode};

/// Decodes `code` with dimension `dim` of μ set to `μ_dim + t` for `steps`
/// evenly spaced `t ∈ [−span, span]` (prior standard deviations). `steps`
/// must be odd so the middle image is the plain reconstruction.
pub fn latent_traversal(model: &AffinityVae, code: &LatentCode, dim: usize, span: f64, steps: usize) -> Result<Vec<Grid>, EvalError> {
    if dim >= code.mu.len() {
        return Err(EvalError::Index(format!("dimension {dim} out of range for d = {}", code.mu.len())));
    }
    if steps == 0 || steps.is_multiple_of(2) {
        return Err(EvalError::Config(format!("steps must be odd, got {steps}")));
    }
    let half = (steps / 2) as f64;
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..steps)
        .map(|i| {
            let mut z = code.mu.clone();
            if steps > 1 {
                z[dim] += span * (i as f64 - half) / half;
            }
            (z, code.pose.clone())
        })
        .collect();
    Ok(model.decode_batch(&inputs)?)
}

/// `n × n` lattice decoded from bilinear blends of four codes given as
/// `[top-left, top-right, bottom-left, bottom-right]`. μ and pose are both blended.
pub fn corner_interpolation(model: &AffinityVae, corners: [&LatentCode; 4], n: usize) -> Result<Vec<Vec<Grid>>, EvalError> {
    if n < 2 {
        return Err(EvalError::Config(format!("lattice size must be at least 2, got {n}")));
    }
    let [tl, tr, bl, br] = corners;
    if corners.iter().any(|c| c.mu.len() != tl.mu.len() || c.pose.len() != tl.pose.len()) {
        return Err(EvalError::Config("corner codes have different widths".into()));
    }
    let blend = |a: &[f64], b: &[f64], c: &[f64], d: &[f64], u: f64, v: f64| -> Vec<f64> {
        (0..a.len())
            .map(|i| (1.0 - v) * ((1.0 - u) * a[i] + u * b[i]) + v * ((1.0 - u) * c[i] + u * d[i]))
            .collect()
    };
    let last = (n - 1) as f64;
    let mut inputs = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let (u, v) = (c as f64 / last, r as f64 / last);
            inputs.push((
                blend(&tl.mu, &tr.mu, &bl.mu, &br.mu, u, v),
                blend(&tl.pose, &tr.pose, &bl.pose, &br.pose, u, v),
            ));
        }
    }
    let mut flat = model.decode_batch(&inputs)?.into_iter();
    Ok((0..n).map(|_| flat.by_ref().take(n).collect()).collect())
}

/// Integer angle in `[−max_deg, max_deg]` whose rotation of `reference`
/// best matches `image` in mean squared error; ties go to the smaller angle.
pub fn best_matching_angle(reference: &Grid, image: &Grid, max_deg: i32) -> i32 {
    let mut best = (f64::INFINITY, 0);
    for a in -max_deg..=max_deg {
        let err = rotate_binary(reference, f64::from(a)).mse(image);
        if err < best.0 {
            best = (err, a);
        }
    }
    best.1
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoseSweep {
    pub images: Vec<Grid>,
    /// `(pose value, best-matching angle of the reference)` per image.
    pub matches: Vec<(f64, i32)>,
}

/// Decodes `code.mu` with a one-dimensional pose set to each of `values`.
pub fn pose_sweep(model: &AffinityVae, code: &LatentCode, values: &[f64], reference: &Grid) -> Result<PoseSweep, EvalError> {
    if model.config.pose_dim != 1 {
        return Err(EvalError::Config(format!("pose sweep needs pose_dim = 1, model has {}", model.config.pose_dim)));
    }
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = values.iter().map(|&p| (code.mu.clone(), vec![p])).collect();
    let images = model.decode_batch(&inputs)?;
    let matches = values.iter().zip(&images).map(|(&p, img)| (p, best_matching_angle(reference, img, 45))).collect();
    Ok(PoseSweep { images, matches })
}

/// Pearson correlation coefficient; 0 when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}
