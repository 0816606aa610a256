//! Raw slice kernels behind the graph operations.

/// `c = a * b` (or `c += a * b` when `accumulate`), with `a` logically `m x k`
/// and `b` logically `k x n`. A `*_t` flag means the operand is stored
/// transposed in row-major order.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_t: bool,
    b: &[f32],
    b_t: bool,
    c: &mut [f32],
    accumulate: bool,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].fill(0.0);
        }
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slices cover the strided extents computed above.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of one 2-D cross-correlation.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Output columns `ox` whose input column `ox * stride + j - pad` lies inside `0..width`.
fn valid_cols(g: &ConvGeom, j: usize) -> (usize, usize) {
    let lo = if g.pad > j { (g.pad - j).div_ceil(g.stride) } else { 0 };
    if g.width + g.pad <= j {
        return (0, 0);
    }
    let hi = ((g.width - 1 + g.pad - j) / g.stride + 1).min(g.out_w);
    (lo.min(hi), hi)
}

/// Unfolds one `C x H x W` image into a `(C*kh*kw) x (out_h*out_w)` matrix.
pub(crate) fn im2col(x: &[f32], g: &ConvGeom, cols: &mut [f32]) {
    let ohw = g.col_cols();
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let dst = &mut cols[row * ohw..(row + 1) * ohw];
                let (lo, hi) = valid_cols(g, j);
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.height as isize || lo == hi {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    line[..lo].fill(0.0);
                    line[hi..].fill(0.0);
                    let ix0 = lo * g.stride + j - g.pad;
                    if g.stride == 1 {
                        line[lo..hi].copy_from_slice(&src[ix0..ix0 + hi - lo]);
                    } else {
                        for (v, s) in line[lo..hi].iter_mut().zip(src[ix0..].iter().step_by(g.stride)) {
                            *v = *s;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
pub(crate) fn col2im_add(cols: &[f32], g: &ConvGeom, dx: &mut [f32]) {
    let ohw = g.col_cols();
    for c in 0..g.channels {
        let plane = &mut dx[c * g.height * g.width..(c + 1) * g.height * g.width];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let src = &cols[row * ohw..(row + 1) * ohw];
                let (lo, hi) = valid_cols(g, j);
                if lo == hi {
                    continue;
                }
                let ix0 = lo * g.stride + j - g.pad;
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let line = &src[oy * g.out_w + lo..oy * g.out_w + hi];
                    if g.stride == 1 {
                        for (d, s) in dst[ix0..ix0 + hi - lo].iter_mut().zip(line) {
                            *d += *s;
                        }
                    } else {
                        for (d, s) in dst[ix0..].iter_mut().step_by(g.stride).zip(line) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
}

/// Nearest-neighbour x2 upsampling of `planes` images of `h x w`.
pub(crate) fn upsample2x(x: &[f32], planes: usize, h: usize, w: usize) -> Vec<f32> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; planes * oh * ow];
    for p in 0..planes {
        let src = &x[p * h * w..(p + 1) * h * w];
        let dst = &mut out[p * oh * ow..(p + 1) * oh * ow];
        for y in 0..oh {
            let srow = &src[(y / 2) * w..(y / 2 + 1) * w];
            for (xx, v) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *v = srow[xx / 2];
            }
        }
    }
    out
}

pub(crate) fn upsample2x_backward(dy: &[f32], planes: usize, h: usize, w: usize) -> Vec<f32> {
    let ow = 2 * w;
    let mut dx = vec![0.0; planes * h * w];
    for p in 0..planes {
        let src = &dy[p * 4 * h * w..(p + 1) * 4 * h * w];
        let dst = &mut dx[p * h * w..(p + 1) * h * w];
        for y in 0..2 * h {
            for xx in 0..ow {
                dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
            }
        }
    }
    dx
}
