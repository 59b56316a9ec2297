//! Fourier shell (ring) correlation between two grids.
//!
//! Coefficient `k` falls in shell `s = floor(|k|)`, where `|k|` is its
//! distance from DC in centred frequency coordinates. Shells run from 0 to
//! Nyquist (`size / 2`); corner frequencies beyond that are ignored.

use num_complex::Complex64;

use super::fft::fft_nd;
use super::AffinityError;
use crate::datagen::Grid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Shell {
    pub radius: usize,
    /// Real part of the normalised cross-correlation; 0 when either grid has no power in the shell.
    pub correlation: f64,
    pub count: usize,
}

/// Centred frequency index of position `i` on an axis of length `n`.
pub(crate) fn centred_frequency(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Shell index of every coefficient, or `None` beyond Nyquist.
pub(crate) fn shell_indices(dims: &[usize]) -> Vec<Option<usize>> {
    let n = dims[0];
    let nyquist = n / 2;
    let total: usize = dims.iter().product();
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut r2 = 0i64;
            for &d in dims.iter().rev() {
                let k = centred_frequency(rem % d, d);
                r2 += k * k;
                rem /= d;
            }
            let shell = (r2 as f64).sqrt().floor() as usize;
            (shell <= nyquist).then_some(shell)
        })
        .collect()
}

fn check_pair(a: &Grid, b: &Grid) -> Result<(), AffinityError> {
    if a.dims() != b.dims() {
        return Err(AffinityError::Shape(format!("grid dims differ: {:?} vs {:?}", a.dims(), b.dims())));
    }
    if !a.is_cubic() {
        return Err(AffinityError::Shape(format!("FSC needs square/cubic grids, got {:?}", a.dims())));
    }
    Ok(())
}

/// Per-shell correlation from two spectra, in radius order. Empty shells
/// are reported with count 0 and correlation 0.
pub fn shell_correlations(dims: &[usize], f1: &[Complex64], f2: &[Complex64]) -> Vec<Shell> {
    let nyquist = dims[0] / 2;
    let mut cross = vec![Complex64::default(); nyquist + 1];
    let mut p1 = vec![0.0; nyquist + 1];
    let mut p2 = vec![0.0; nyquist + 1];
    let mut count = vec![0usize; nyquist + 1];
    for (idx, shell) in shell_indices(dims).into_iter().enumerate() {
        let Some(s) = shell else { continue };
        cross[s] += f1[idx] * f2[idx].conj();
        p1[s] += f1[idx].norm_sqr();
        p2[s] += f2[idx].norm_sqr();
        count[s] += 1;
    }
    (0..=nyquist)
        .map(|s| {
            let den = (p1[s] * p2[s]).sqrt();
            Shell {
                radius: s,
                correlation: if den > 0.0 { cross[s].re / den } else { 0.0 },
                count: count[s],
            }
        })
        .collect()
}

pub fn fsc_curve(a: &Grid, b: &Grid) -> Result<Vec<Shell>, AffinityError> {
    check_pair(a, b)?;
    let fa = fft_nd(a)?;
    let fb = fft_nd(b)?;
    Ok(shell_correlations(a.dims(), &fa.coefficients, &fb.coefficients))
}

/// Shell-count weighted mean of a curve over its non-empty shells.
pub fn weighted_average(curve: &[Shell]) -> f64 {
    let (num, den) = curve
        .iter()
        .filter(|s| s.count > 0)
        .fold((0.0, 0usize), |(n, d), s| (n + s.count as f64 * s.correlation, d + s.count));
    if den == 0 {
        0.0
    } else {
        (num / den as f64).clamp(-1.0, 1.0)
    }
}

pub fn fsc_average(a: &Grid, b: &Grid) -> Result<f64, AffinityError> {
    Ok(weighted_average(&fsc_curve(a, b)?))
}
