//! Rotation, translation, resizing and blurring of grids.
//!
//! Rotations are about the grid centre `(n − 1) / 2` and use inverse
//! mapping with bilinear (2D) or trilinear (3D) interpolation; samples
//! falling outside the grid read as zero.

use super::Grid;

/// Cosine and sine of an angle in degrees, exact for multiples of 90°.
pub fn cos_sin_deg(deg: f64) -> (f64, f64) {
    let quarter = deg / 90.0;
    if quarter.fract() == 0.0 {
        match (quarter as i64).rem_euclid(4) {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        }
    } else {
        let r = deg.to_radians();
        (r.cos(), r.sin())
    }
}

type Mat3 = [[f64; 3]; 3];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Rotation in `(x, y, z)` coordinates composed from planar rotations
/// applied in the order xy, xz, yz.
pub fn rotation_matrix(angles_deg: [f64; 3]) -> [[f64; 3]; 3] {
    let (c1, s1) = cos_sin_deg(angles_deg[0]);
    let (c2, s2) = cos_sin_deg(angles_deg[1]);
    let (c3, s3) = cos_sin_deg(angles_deg[2]);
    let xy = [[c1, -s1, 0.0], [s1, c1, 0.0], [0.0, 0.0, 1.0]];
    let xz = [[c2, 0.0, -s2], [0.0, 1.0, 0.0], [s2, 0.0, c2]];
    let yz = [[1.0, 0.0, 0.0], [0.0, c3, -s3], [0.0, s3, c3]];
    matmul(&yz, &matmul(&xz, &xy))
}

fn bilinear(g: &Grid, y: f64, x: f64) -> f64 {
    let (h, w) = (g.dims()[0] as isize, g.dims()[1] as isize);
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let v = g.values();
    let at = |yy: isize, xx: isize| -> f64 {
        if yy < 0 || xx < 0 || yy >= h || xx >= w {
            0.0
        } else {
            f64::from(v[(yy * w + xx) as usize])
        }
    };
    (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1))
}

fn trilinear(g: &Grid, z: f64, y: f64, x: f64) -> f64 {
    let (d, h, w) = (g.dims()[0] as isize, g.dims()[1] as isize, g.dims()[2] as isize);
    let (z0, y0, x0) = (z.floor(), y.floor(), x.floor());
    let (fz, fy, fx) = (z - z0, y - y0, x - x0);
    let (z0, y0, x0) = (z0 as isize, y0 as isize, x0 as isize);
    let v = g.values();
    let mut acc = 0.0;
    for (dz, wz) in [(0, 1.0 - fz), (1, fz)] {
        if wz == 0.0 {
            continue;
        }
        let zz = z0 + dz;
        if zz < 0 || zz >= d {
            continue;
        }
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            let yy = y0 + dy;
            if yy < 0 || yy >= h {
                continue;
            }
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                let xx = x0 + dx;
                if xx < 0 || xx >= w {
                    continue;
                }
                acc += wz * wy * wx * f64::from(v[((zz * h + yy) * w + xx) as usize]);
            }
        }
    }
    acc
}

/// Rotates a 2D grid counter-clockwise (in `(x, y)` index coordinates) by `angle_deg`.
pub fn rotate_2d(g: &Grid, angle_deg: f64) -> Grid {
    assert_eq!(g.rank(), 2, "rotate_2d needs a 2D grid");
    if angle_deg == 0.0 {
        return g.clone();
    }
    let (h, w) = (g.dims()[0], g.dims()[1]);
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (c, s) = cos_sin_deg(angle_deg);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            // inverse rotation
            let sx = c * dx + s * dy + cx;
            let sy = -s * dx + c * dy + cy;
            out.push(bilinear(g, sy, sx) as f32);
        }
    }
    Grid::new(g.dims().to_vec(), out).expect("same dims").with_voxel_size(g.voxel_size())
}

/// Rotates a 3D grid by `angles_deg` (planes xy, xz, yz in that order) and
/// then shifts it by `translation` cells along `(x, y, z)`.
pub fn transform_3d(g: &Grid, angles_deg: [f64; 3], translation: [f64; 3]) -> Grid {
    assert_eq!(g.rank(), 3, "transform_3d needs a 3D grid");
    let r = rotation_matrix(angles_deg);
    let [d, h, w] = [g.dims()[0], g.dims()[1], g.dims()[2]];
    let centre = [(w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, (d as f64 - 1.0) / 2.0];
    let mut out = Vec::with_capacity(d * h * w);
    for z in 0..d {
        for y in 0..h {
            for x in 0..w {
                let p = [
                    x as f64 - centre[0] - translation[0],
                    y as f64 - centre[1] - translation[1],
                    z as f64 - centre[2] - translation[2],
                ];
                // q = Rᵀ p + c
                let q: Vec<f64> = (0..3).map(|i| (0..3).map(|k| r[k][i] * p[k]).sum::<f64>() + centre[i]).collect();
                out.push(trilinear(g, q[2], q[1], q[0]) as f32);
            }
        }
    }
    Grid::new(g.dims().to_vec(), out).expect("same dims").with_voxel_size(g.voxel_size())
}

/// Resamples a grid of any extents to a square/cubic grid of `size` cells
/// per axis, aligning cell centres.
pub fn resize(g: &Grid, size: usize) -> Grid {
    let rank = g.rank();
    if g.dims().iter().all(|&d| d == size) {
        return g.clone();
    }
    let scale: Vec<f64> = g.dims().iter().map(|&d| d as f64 / size as f64).collect();
    let src = |i: usize, axis: usize| (i as f64 + 0.5) * scale[axis] - 0.5;
    let voxel = g.voxel_size() * (g.dims()[0] as f32 / size as f32);
    let out = if rank == 2 {
        Grid::from_fn(2, size, |idx| bilinear(g, src(idx / size, 0), src(idx % size, 1)) as f32)
    } else {
        Grid::from_fn(3, size, |idx| {
            let (z, y, x) = (idx / (size * size), (idx / size) % size, idx % size);
            trilinear(g, src(z, 0), src(y, 1), src(x, 2)) as f32
        })
    };
    out.with_voxel_size(voxel)
}

/// Separable Gaussian blur of a 2D grid with zero boundary, truncated at 3σ.
pub fn gaussian_blur_2d(g: &Grid, sigma: f64) -> Vec<f64> {
    let (h, w) = (g.dims()[0], g.dims()[1]);
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = taps.iter().sum();
    let taps: Vec<f64> = taps.iter().map(|t| t / norm).collect();
    let src = g.to_f64();
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - radius;
                if xx >= 0 && (xx as usize) < w {
                    acc += t * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = y as isize + k as isize - radius;
                if yy >= 0 && (yy as usize) < h {
                    acc += t * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}
