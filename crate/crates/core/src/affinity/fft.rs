use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::AffinityError;
use crate::datagen::Grid;

/// Full complex spectrum of a grid, in the same row-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub dims: Vec<usize>,
    pub coefficients: Vec<Complex64>,
}

fn check_dims(dims: &[usize]) -> Result<(), AffinityError> {
    if dims.is_empty() || dims.iter().any(|d| !d.is_power_of_two()) {
        return Err(AffinityError::Size(format!("FFT extents must be powers of two, got {dims:?}")));
    }
    Ok(())
}

/// In-place multi-dimensional transform along every axis. Unnormalised in
/// both directions.
fn transform(dims: &[usize], data: &mut [Complex64], direction: FftDirection) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = dims.iter().product();
    let mut line = Vec::new();
    for axis in 0..dims.len() {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let stride: usize = dims[axis + 1..].iter().product();
        let fft = planner.plan_fft(n, direction);
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        line.resize(n, Complex64::default());
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

/// Forward DFT of real samples with the given row-major extents.
pub fn fft_real(dims: &[usize], values: &[f64]) -> Result<Spectrum, AffinityError> {
    check_dims(dims)?;
    if dims.iter().product::<usize>() != values.len() {
        return Err(AffinityError::Shape(format!("{} values for dims {dims:?}", values.len())));
    }
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(dims, &mut data, FftDirection::Forward);
    Ok(Spectrum {
        dims: dims.to_vec(),
        coefficients: data,
    })
}

pub fn fft_nd(grid: &Grid) -> Result<Spectrum, AffinityError> {
    fft_real(grid.dims(), &grid.to_f64())
}

/// Inverse DFT (normalised by `1/N`). Returns the complex samples.
pub fn ifft_complex(spectrum: &Spectrum) -> Result<Vec<Complex64>, AffinityError> {
    check_dims(&spectrum.dims)?;
    let mut data = spectrum.coefficients.clone();
    transform(&spectrum.dims, &mut data, FftDirection::Inverse);
    let scale = 1.0 / data.len() as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    Ok(data)
}

/// Inverse DFT keeping only the real part, as a grid.
pub fn ifft_nd(spectrum: &Spectrum) -> Result<Grid, AffinityError> {
    let data = ifft_complex(spectrum)?;
    let real: Vec<f64> = data.iter().map(|c| c.re).collect();
    Ok(Grid::from_f64(spectrum.dims.clone(), &real)?)
}
