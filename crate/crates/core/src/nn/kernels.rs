//! Inner loops that are not matrix products.

use std::ops::AddAssign;

use super::Scalar;

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Panics unless a `rows x cols` view with non-negative strides fits in `len`.
pub(crate) fn check_extent(len: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    assert!(rs >= 0 && cs >= 0, "negative stride");
    if rows > 0 && cols > 0 {
        let last = (rows - 1) * rs as usize + (cols - 1) * cs as usize;
        assert!(last < len, "matrix view exceeds its buffer");
    }
}

/// Geometry of one valid (unpadded) convolution.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn patch(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }
}

/// Patch matrix `[out_h * out_w, channels * k * k]`; patch columns are ordered
/// channel, kernel row, kernel column, matching the weight rows.
pub(crate) fn im2col<T: Copy>(img: &[T], g: &ConvGeom, out: &mut Vec<T>) {
    out.clear();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            for c in 0..g.channels {
                let plane = &img[c * g.height * g.width..(c + 1) * g.height * g.width];
                for ky in 0..g.kernel {
                    let row = (oy * g.stride + ky) * g.width + ox * g.stride;
                    out.extend_from_slice(&plane[row..row + g.kernel]);
                }
            }
        }
    }
}

/// Scatter-adds a patch-matrix gradient back onto the image gradient.
pub(crate) fn col2im<T: Copy + AddAssign>(cols: &[T], g: &ConvGeom, img: &mut [T]) {
    let patch = g.patch();
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let p = &cols[(oy * g.out_w + ox) * patch..][..patch];
            let mut idx = 0;
            for c in 0..g.channels {
                let base = c * g.height * g.width;
                for ky in 0..g.kernel {
                    let row = base + (oy * g.stride + ky) * g.width + ox * g.stride;
                    for kx in 0..g.kernel {
                        img[row + kx] += p[idx];
                        idx += 1;
                    }
                }
            }
        }
    }
}
