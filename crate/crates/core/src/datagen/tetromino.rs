//! Tetracube templates and their rendering onto cubic canvases.
//!
//! Each template is a set of unit-cube positions in `(x, y, z)` cube units,
//! all containing the origin cube. The cube edge is `size / 8` cells and the
//! template's centre of mass is placed at the canvas centre (rounded to whole
//! cells) before rotation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::resample::{rotation_matrix, transform_3d};
use super::{DatagenError, Grid};

pub type Cube = [i32; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TetrominoShape {
    I,
    L,
    T,
    S,
    O,
    /// Non-planar branch: three arms leaving one corner cube along x, y and z.
    E,
}

impl TetrominoShape {
    pub const ALL: [TetrominoShape; 6] = [Self::I, Self::L, Self::T, Self::S, Self::O, Self::E];

    pub fn cubes(self) -> [Cube; 4] {
        match self {
            Self::I => [[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]],
            Self::L => [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]],
            Self::T => [[0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 1, 0]],
            Self::S => [[0, 0, 0], [1, 0, 0], [1, 1, 0], [2, 1, 0]],
            Self::O => [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]],
            Self::E => [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::L => "L",
            Self::T => "T",
            Self::S => "S",
            Self::O => "O",
            Self::E => "E",
        }
    }
}

impl fmt::Display for TetrominoShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TetrominoShape {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| DatagenError::Roster(s.to_string()))
    }
}

/// A tetracube class or a fusion of two of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CubeShape {
    Single(TetrominoShape),
    Fusion(TetrominoShape, TetrominoShape),
}

impl CubeShape {
    pub fn name(&self) -> String {
        match self {
            CubeShape::Single(s) => s.name().to_string(),
            CubeShape::Fusion(a, b) => format!("{a}{b}"),
        }
    }

    pub fn cubes(&self) -> Result<Vec<Cube>, DatagenError> {
        match self {
            CubeShape::Single(s) => Ok(s.cubes().to_vec()),
            CubeShape::Fusion(a, b) => fuse_cubes(*a, *b, [0, 0, 0]),
        }
    }
}

impl FromStr for CubeShape {
    type Err = DatagenError;

    /// `"L"` is a single shape, `"EL"` the fusion of E and L.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<String> = s.chars().map(String::from).collect();
        match parts.as_slice() {
            [a] => Ok(CubeShape::Single(a.parse()?)),
            [a, b] => Ok(CubeShape::Fusion(a.parse()?, b.parse()?)),
            _ => Err(DatagenError::Roster(s.to_string())),
        }
    }
}

/// True when the cube set forms one face-connected component.
pub fn is_face_connected(cubes: &[Cube]) -> bool {
    let Some(&start) = cubes.first() else { return true };
    let set: BTreeSet<Cube> = cubes.iter().copied().collect();
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(c) = stack.pop() {
        for axis in 0..3 {
            for step in [-1, 1] {
                let mut n = c;
                n[axis] += step;
                if set.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
    }
    seen.len() == set.len()
}

/// Union of two templates, with `b` shifted by `offset` cube units.
pub fn fuse_cubes(a: TetrominoShape, b: TetrominoShape, offset: Cube) -> Result<Vec<Cube>, DatagenError> {
    let set: BTreeSet<Cube> = a
        .cubes()
        .into_iter()
        .chain(b.cubes().into_iter().map(|c| [c[0] + offset[0], c[1] + offset[1], c[2] + offset[2]]))
        .collect();
    let cubes: Vec<Cube> = set.into_iter().collect();
    if !is_face_connected(&cubes) {
        return Err(DatagenError::Fusion(format!("{a} and {b} at offset {offset:?} are not face-connected")));
    }
    Ok(cubes)
}

/// Axis-aligned rendering of a cube set, bounding box centred on the canvas.
pub fn render_cubes(cubes: &[Cube], size: usize) -> Result<Grid, DatagenError> {
    if size < 8 || !size.is_power_of_two() {
        return Err(DatagenError::Domain(format!("canvas must be a power of two >= 8, got {size}")));
    }
    let edge = (size / 8) as i32;
    let mut offset = [0i32; 3];
    for a in 0..3 {
        let mean = cubes.iter().map(|c| f64::from(c[a])).sum::<f64>() / cubes.len() as f64;
        let centre = (mean + 0.5) * f64::from(edge);
        offset[a] = (size as f64 / 2.0 - centre).round() as i32;
        let lo = cubes.iter().map(|c| c[a]).min().unwrap_or(0);
        let hi = cubes.iter().map(|c| c[a]).max().unwrap_or(0);
        if offset[a] + lo * edge < 0 || offset[a] + (hi + 1) * edge > size as i32 {
            return Err(DatagenError::Placement(format!("shape does not fit a {size} canvas when centred")));
        }
    }
    let mut grid = Grid::zeros(&[size, size, size]);
    let vals = grid.values_mut();
    for c in cubes {
        let base: Vec<usize> = (0..3).map(|a| (offset[a] + c[a] * edge) as usize).collect();
        for dz in 0..edge as usize {
            for dy in 0..edge as usize {
                for dx in 0..edge as usize {
                    let (x, y, z) = (base[0] + dx, base[1] + dy, base[2] + dz);
                    vals[(z * size + y) * size + x] = 1.0;
                }
            }
        }
    }
    Ok(grid)
}

/// Checks that every occupied voxel, after rotation and translation, stays
/// inside the canvas (corners of voxels within `[-0.5, size - 0.5]`).
fn check_placement(base: &Grid, angles: [f64; 3], translation: [f64; 3]) -> Result<(), DatagenError> {
    let n = base.size();
    let r = rotation_matrix(angles);
    let c = (n as f64 - 1.0) / 2.0;
    let v = base.values();
    let limit = c + 0.5 + 1e-9;
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                if v[(z * n + y) * n + x] == 0.0 {
                    continue;
                }
                for corner in 0..8 {
                    let p = [
                        x as f64 - c + if corner & 1 == 0 { -0.5 } else { 0.5 },
                        y as f64 - c + if corner & 2 == 0 { -0.5 } else { 0.5 },
                        z as f64 - c + if corner & 4 == 0 { -0.5 } else { 0.5 },
                    ];
                    for i in 0..3 {
                        let q: f64 = (0..3).map(|k| r[i][k] * p[k]).sum::<f64>() + translation[i];
                        if q.abs() > limit {
                            return Err(DatagenError::Placement(format!(
                                "rotation {angles:?} with translation {translation:?} moves mass off the {n}-cell canvas"
                            )));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn place(base: Grid, rotation: [f64; 3], translation: [f64; 3]) -> Result<Grid, DatagenError> {
    if rotation.iter().chain(&translation).any(|v| !v.is_finite()) {
        return Err(DatagenError::Domain("rotation and translation must be finite".into()));
    }
    check_placement(&base, rotation, translation)?;
    let unrotated = rotation.iter().all(|a| a.rem_euclid(360.0) == 0.0);
    let untranslated = translation.iter().all(|&t| t == 0.0);
    if unrotated && untranslated {
        return Ok(base);
    }
    Ok(transform_3d(&base, rotation, translation).map(|v| v.clamp(0.0, 1.0)))
}

/// Renders a rotated, translated tetracube. Angles are degrees in the
/// xy, xz and yz planes; translation is in cells along `(x, y, z)`.
pub fn make_tetromino(
    shape: TetrominoShape,
    rotation: [f64; 3],
    translation: [f64; 3],
    size: usize,
) -> Result<Grid, DatagenError> {
    place(render_cubes(&shape.cubes(), size)?, rotation, translation)
}

/// Renders the union of two templates, `b` shifted by `offset` cube units.
pub fn make_unseen_fusion(
    a: TetrominoShape,
    b: TetrominoShape,
    offset: Cube,
    rotation: [f64; 3],
    translation: [f64; 3],
    size: usize,
) -> Result<Grid, DatagenError> {
    let cubes = fuse_cubes(a, b, offset)?;
    place(render_cubes(&cubes, size)?, rotation, translation)
}

/// Renders any [`CubeShape`].
pub fn make_cube_shape(shape: &CubeShape, rotation: [f64; 3], translation: [f64; 3], size: usize) -> Result<Grid, DatagenError> {
    place(render_cubes(&shape.cubes()?, size)?, rotation, translation)
}
