//! Valid (unpadded) strided convolution kernels over 2 or 3 spatial axes.
//!
//! Everything is computed on a `[batch, channels, d, h, w]` view; 2D data
//! uses `d = 1`. Three primitives cover both the convolution and its
//! transpose:
//!
//! * `correlate`: gather from a large field into a small one,
//! * `scatter`: the adjoint of `correlate`,
//! * `kernel_grad`: gradient of either with respect to the kernel.

use super::TensorError;

/// `floor((input - kernel) / stride) + 1`, or `None` when the kernel does not fit.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || kernel > input {
        return None;
    }
    Some((input - kernel) / stride + 1)
}

/// `(input - 1) * stride + kernel`, the inverse of [`conv_output_extent`]
/// whenever `(input - kernel)` is divisible by the stride.
pub fn conv_transpose_output_extent(input: usize, kernel: usize, stride: usize) -> usize {
    (input - 1) * stride + kernel
}

/// Spatial extents padded to three axes.
pub(crate) fn spatial3(spatial: &[usize]) -> [usize; 3] {
    match *spatial {
        [h, w] => [1, h, w],
        [d, h, w] => [d, h, w],
        _ => unreachable!("spatial rank checked by caller"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    /// Channels of the large (un-strided) field.
    pub wide_channels: usize,
    /// Channels of the small (strided) field.
    pub narrow_channels: usize,
    pub wide: [usize; 3],
    pub narrow: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: usize,
    pub spatial_rank: usize,
}

impl ConvGeometry {
    /// Geometry of a forward convolution: `input` `[B, C, s...]`, `kernel` `[K, C, k...]`.
    pub fn for_conv(input: &[usize], kernel: &[usize], stride: usize) -> Result<Self, TensorError> {
        let err = || TensorError::Dimension {
            op: "conv",
            lhs: input.to_vec(),
            rhs: kernel.to_vec(),
        };
        if !(input.len() == 4 || input.len() == 5) || kernel.len() != input.len() || input[1] != kernel[1] || stride == 0 {
            return Err(err());
        }
        let rank = input.len() - 2;
        let mut out = Vec::with_capacity(rank);
        for axis in 0..rank {
            out.push(conv_output_extent(input[2 + axis], kernel[2 + axis], stride).ok_or_else(err)?);
        }
        Ok(Self {
            batch: input[0],
            wide_channels: input[1],
            narrow_channels: kernel[0],
            wide: spatial3(&input[2..]),
            narrow: spatial3(&out),
            kernel: spatial3(&kernel[2..]),
            stride,
            spatial_rank: rank,
        })
    }

    /// Geometry of a transposed convolution: `input` `[B, K, s...]`, `kernel` `[K, C, k...]`.
    pub fn for_conv_transpose(input: &[usize], kernel: &[usize], stride: usize) -> Result<Self, TensorError> {
        let err = || TensorError::Dimension {
            op: "conv_transpose",
            lhs: input.to_vec(),
            rhs: kernel.to_vec(),
        };
        if !(input.len() == 4 || input.len() == 5) || kernel.len() != input.len() || input[1] != kernel[0] || stride == 0 {
            return Err(err());
        }
        let rank = input.len() - 2;
        let out: Vec<usize> = (0..rank)
            .map(|a| conv_transpose_output_extent(input[2 + a], kernel[2 + a], stride))
            .collect();
        Ok(Self {
            batch: input[0],
            wide_channels: kernel[1],
            narrow_channels: input[1],
            wide: spatial3(&out),
            narrow: spatial3(&input[2..]),
            kernel: spatial3(&kernel[2..]),
            stride,
            spatial_rank: rank,
        })
    }

    fn spatial_shape(&self, ext: [usize; 3]) -> Vec<usize> {
        if self.spatial_rank == 2 {
            vec![ext[1], ext[2]]
        } else {
            ext.to_vec()
        }
    }

    pub fn wide_shape(&self) -> Vec<usize> {
        let mut s = vec![self.batch, self.wide_channels];
        s.extend(self.spatial_shape(self.wide));
        s
    }

    pub fn narrow_shape(&self) -> Vec<usize> {
        let mut s = vec![self.batch, self.narrow_channels];
        s.extend(self.spatial_shape(self.narrow));
        s
    }

    fn wide_len(&self) -> usize {
        self.wide.iter().product()
    }

    fn narrow_len(&self) -> usize {
        self.narrow.iter().product()
    }

    fn kernel_len(&self) -> usize {
        self.kernel.iter().product()
    }
}

/// `narrow[b, k, p] = Σ_c Σ_o wide[b, c, p·s + o] · kernel[k, c, o]`.
pub(crate) fn correlate(g: &ConvGeometry, wide: &[f64], kernel: &[f64]) -> Vec<f64> {
    let [_, wh, ww] = g.wide;
    let [nd, nh, nw] = g.narrow;
    let [kd, kh, kw] = g.kernel;
    let s = g.stride;
    let (wl, nl, kl) = (g.wide_len(), g.narrow_len(), g.kernel_len());
    let mut out = vec![0.0; g.batch * g.narrow_channels * nl];
    for b in 0..g.batch {
        for k in 0..g.narrow_channels {
            let dst = &mut out[(b * g.narrow_channels + k) * nl..][..nl];
            for c in 0..g.wide_channels {
                let src = &wide[(b * g.wide_channels + c) * wl..][..wl];
                let ker = &kernel[(k * g.wide_channels + c) * kl..][..kl];
                for oz in 0..kd {
                    for oy in 0..kh {
                        for ox in 0..kw {
                            let weight = ker[(oz * kh + oy) * kw + ox];
                            for z in 0..nd {
                                for y in 0..nh {
                                    let row = ((z * s + oz) * wh + y * s + oy) * ww + ox;
                                    let drow = (z * nh + y) * nw;
                                    for x in 0..nw {
                                        dst[drow + x] += weight * src[row + x * s];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`correlate`]: `wide[b, c, p·s + o] += narrow[b, k, p] · kernel[k, c, o]`.
pub(crate) fn scatter(g: &ConvGeometry, narrow: &[f64], kernel: &[f64]) -> Vec<f64> {
    let [_, wh, ww] = g.wide;
    let [nd, nh, nw] = g.narrow;
    let [kd, kh, kw] = g.kernel;
    let s = g.stride;
    let (wl, nl, kl) = (g.wide_len(), g.narrow_len(), g.kernel_len());
    let mut out = vec![0.0; g.batch * g.wide_channels * wl];
    for b in 0..g.batch {
        for k in 0..g.narrow_channels {
            let src = &narrow[(b * g.narrow_channels + k) * nl..][..nl];
            for c in 0..g.wide_channels {
                let dst = &mut out[(b * g.wide_channels + c) * wl..][..wl];
                let ker = &kernel[(k * g.wide_channels + c) * kl..][..kl];
                for oz in 0..kd {
                    for oy in 0..kh {
                        for ox in 0..kw {
                            let weight = ker[(oz * kh + oy) * kw + ox];
                            for z in 0..nd {
                                for y in 0..nh {
                                    let row = ((z * s + oz) * wh + y * s + oy) * ww + ox;
                                    let srow = (z * nh + y) * nw;
                                    for x in 0..nw {
                                        dst[row + x * s] += weight * src[srow + x];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// `kernel[k, c, o] = Σ_b Σ_p narrow[b, k, p] · wide[b, c, p·s + o]`.
pub(crate) fn kernel_grad(g: &ConvGeometry, narrow: &[f64], wide: &[f64]) -> Vec<f64> {
    let [_, wh, ww] = g.wide;
    let [nd, nh, nw] = g.narrow;
    let [kd, kh, kw] = g.kernel;
    let s = g.stride;
    let (wl, nl, kl) = (g.wide_len(), g.narrow_len(), g.kernel_len());
    let mut out = vec![0.0; g.narrow_channels * g.wide_channels * kl];
    for b in 0..g.batch {
        for k in 0..g.narrow_channels {
            let nsrc = &narrow[(b * g.narrow_channels + k) * nl..][..nl];
            for c in 0..g.wide_channels {
                let wsrc = &wide[(b * g.wide_channels + c) * wl..][..wl];
                let dst = &mut out[(k * g.wide_channels + c) * kl..][..kl];
                for oz in 0..kd {
                    for oy in 0..kh {
                        for ox in 0..kw {
                            let mut acc = 0.0;
                            for z in 0..nd {
                                for y in 0..nh {
                                    let row = ((z * s + oz) * wh + y * s + oy) * ww + ox;
                                    let nrow = (z * nh + y) * nw;
                                    for x in 0..nw {
                                        acc += nsrc[nrow + x] * wsrc[row + x * s];
                                    }
                                }
                            }
                            dst[(oz * kh + oy) * kw + ox] += acc;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adds `bias[c]` to every cell of channel `c`.
pub(crate) fn add_channel_bias(out: &mut [f64], batch: usize, channels: usize, bias: &[f64]) {
    let cell = out.len() / (batch * channels);
    for (i, chunk) in out.chunks_mut(cell).enumerate() {
        let b = bias[i % channels];
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

/// Sums each channel over batch and space.
pub(crate) fn channel_sums(grad: &[f64], batch: usize, channels: usize) -> Vec<f64> {
    let cell = grad.len() / (batch * channels);
    let mut out = vec![0.0; channels];
    for (i, chunk) in grad.chunks(cell).enumerate() {
        out[i % channels] += chunk.iter().sum::<f64>();
    }
    out
}
