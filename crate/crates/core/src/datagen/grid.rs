use super::DatagenError;

/// Square image or cubic volume of scalar densities.
///
/// `dims` are row-major extents with the fastest axis last: `[h, w]` for
/// images and `[d, h, w]` for volumes. Values are stored as `f32`, which is
/// also the on-disk precision of the volume format.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dims: Vec<usize>,
    values: Vec<f32>,
    voxel_size: f32,
}

impl Grid {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self, DatagenError> {
        if !(dims.len() == 2 || dims.len() == 3) || dims.contains(&0) {
            return Err(DatagenError::Shape(format!("grid must be 2D or 3D with non-zero extents, got {dims:?}")));
        }
        if dims.iter().product::<usize>() != values.len() {
            return Err(DatagenError::Shape(format!(
                "dims {dims:?} need {} values, got {}",
                dims.iter().product::<usize>(),
                values.len()
            )));
        }
        Ok(Self {
            dims,
            values,
            voxel_size: 1.0,
        })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::new(dims.to_vec(), vec![0.0; dims.iter().product()]).expect("valid dims")
    }

    /// Square/cubic grid of the given rank filled by `f(index)`.
    pub fn from_fn(rank: usize, size: usize, f: impl FnMut(usize) -> f32) -> Self {
        let dims = vec![size; rank];
        let values = (0..size.pow(rank as u32)).map(f).collect();
        Self::new(dims, values).expect("valid dims")
    }

    pub fn with_voxel_size(mut self, voxel_size: f32) -> Self {
        self.voxel_size = voxel_size;
        self
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Extent of the first axis; all axes are equal for square/cubic grids.
    pub fn size(&self) -> usize {
        self.dims[0]
    }

    pub fn is_cubic(&self) -> bool {
        self.dims.iter().all(|&d| d == self.dims[0])
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn voxel_size(&self) -> f32 {
        self.voxel_size
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().map(|&v| f64::from(v)).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn from_f64(dims: Vec<usize>, values: &[f64]) -> Result<Self, DatagenError> {
        Self::new(dims, values.iter().map(|&v| v as f32).collect())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            voxel_size: self.voxel_size,
        }
    }

    /// Rescales values linearly into `[0, 1]`; constant grids become zero.
    pub fn normalized(&self) -> Self {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if !(range > 0.0) {
            return self.map(|_| 0.0);
        }
        self.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
    }

    /// Central slice through the slowest axis (identity for 2D grids).
    pub fn central_slice(&self) -> Grid {
        if self.rank() == 2 {
            return self.clone();
        }
        let [d, h, w] = [self.dims[0], self.dims[1], self.dims[2]];
        let z = d / 2;
        Grid::new(vec![h, w], self.values[z * h * w..(z + 1) * h * w].to_vec()).expect("valid slice")
    }

    pub fn mse(&self, other: &Grid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>()
            / self.values.len() as f64
    }
}
