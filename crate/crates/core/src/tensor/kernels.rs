//! CPU kernels: strided GEMM, patch gather/scatter, convolutions and batch
//! normalization. All batch samples go through a single GEMM per layer; the
//! gather/scatter and per-channel loops are split across threads by output
//! row or plane.

use super::{Real, Shape, Tensor};
use crate::error::TensorError;
use crate::parallel;

/// `c = alpha·op(a)·op(b) + beta·c` with row-major storage. `op(a)` is `m×k`
/// (stored `k×m` when `trans_a`), `op(b)` is `k×n` (stored `n×k` when
/// `trans_b`) and `c` is `m×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k, "gemm: lhs too short");
    assert!(b.len() >= k * n, "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    if k == 0 {
        for v in &mut c[..m * n] {
            *v = *v * beta;
        }
        return;
    }
    T::gemm_raw(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, n as isize, 1);
}

/// Geometry of a strided, zero-padded sliding window over a `c×h×w` image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
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
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        op: &'static str,
        channels: usize,
        height: usize,
        width: usize,
        kh: usize,
        kw: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self, TensorError> {
        if stride == 0 {
            return Err(TensorError::Shape {
                op,
                detail: "stride must be at least 1".into(),
            });
        }
        if kh == 0 || kw == 0 || height + 2 * pad < kh || width + 2 * pad < kw {
            return Err(TensorError::EmptyOutput {
                op,
                detail: format!(
                    "kernel {kh}x{kw} does not fit padded input {}x{}",
                    height + 2 * pad,
                    width + 2 * pad
                ),
            });
        }
        let out_h = (height + 2 * pad - kh) / stride + 1;
        let out_w = (width + 2 * pad - kw) / stride + 1;
        if channels == 0 {
            return Err(TensorError::EmptyOutput {
                op,
                detail: "zero channels".into(),
            });
        }
        Ok(ConvGeom {
            channels,
            height,
            width,
            kh,
            kw,
            stride,
            pad,
            out_h,
            out_w,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn source(&self, out: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (out * self.stride + k) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

/// Gather patches of `n` images into a `[patch_len, n·positions]` matrix.
pub fn im2col<T: Real>(x: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let p = g.positions();
    let row_len = n * p;
    let mut col = vec![T::zero(); g.patch_len() * row_len];
    let plane = g.height * g.width;
    parallel::for_each_chunk_mut(&mut col, row_len, |k, row| {
        let c = k / (g.kh * g.kw);
        let ky = (k / g.kw) % g.kh;
        let kx = k % g.kw;
        for s in 0..n {
            let img = &x[(s * g.channels + c) * plane..][..plane];
            let dst = &mut row[s * p..(s + 1) * p];
            for oy in 0..g.out_h {
                let Some(iy) = g.source(oy, ky, g.height) else {
                    continue;
                };
                for ox in 0..g.out_w {
                    if let Some(ix) = g.source(ox, kx, g.width) {
                        dst[oy * g.out_w + ox] = img[iy * g.width + ix];
                    }
                }
            }
        }
    });
    col
}

/// Scatter-add a `[patch_len, n·positions]` matrix back into `n` images.
/// Adjoint of [`im2col`].
pub fn col2im<T: Real>(col: &[T], n: usize, g: &ConvGeom) -> Vec<T> {
    let p = g.positions();
    let row_len = n * p;
    let plane = g.height * g.width;
    let mut out = vec![T::zero(); n * g.channels * plane];
    parallel::for_each_chunk_mut(&mut out, plane, |idx, dst| {
        let s = idx / g.channels;
        let c = idx % g.channels;
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let k = (c * g.kh + ky) * g.kw + kx;
                let src = &col[k * row_len + s * p..][..p];
                for oy in 0..g.out_h {
                    let Some(iy) = g.source(oy, ky, g.height) else {
                        continue;
                    };
                    for ox in 0..g.out_w {
                        if let Some(ix) = g.source(ox, kx, g.width) {
                            dst[iy * g.width + ix] = dst[iy * g.width + ix] + src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    });
    out
}

/// `[n, c, p]` → `[c, n·p]`.
pub fn nchw_to_cnp<T: Real>(x: &[T], n: usize, c: usize, p: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    parallel::for_each_chunk_mut(&mut out, n * p, |ci, row| {
        for s in 0..n {
            row[s * p..(s + 1) * p].copy_from_slice(&x[(s * c + ci) * p..][..p]);
        }
    });
    out
}

/// `[c, n·p]` → `[n, c, p]`, adding `bias[c]` when given.
pub fn cnp_to_nchw<T: Real>(y: &[T], n: usize, c: usize, p: usize, bias: Option<&[T]>) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    parallel::for_each_chunk_mut(&mut out, p, |idx, dst| {
        let s = idx / c;
        let ci = idx % c;
        let src = &y[ci * n * p + s * p..][..p];
        match bias {
            Some(b) => {
                for (d, v) in dst.iter_mut().zip(src) {
                    *d = *v + b[ci];
                }
            }
            None => dst.copy_from_slice(src),
        }
    });
    out
}

/// Per-channel sums of an NCHW buffer.
pub fn channel_sums<T: Real>(x: &[T], shape: Shape) -> Vec<T> {
    let [n, c, h, w] = shape;
    let plane = h * w;
    parallel::map_range(c, |ci| {
        let mut acc = T::zero();
        for s in 0..n {
            for v in &x[(s * c + ci) * plane..][..plane] {
                acc = acc + *v;
            }
        }
        acc
    })
}

fn conv2d_geom<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<ConvGeom, TensorError> {
    let [_, ic, h, wd] = x.shape();
    let [_, wic, kh, kw] = w.shape();
    if ic != wic {
        return Err(TensorError::Shape {
            op: "conv2d",
            detail: format!("input has {ic} channels but weight expects {wic}"),
        });
    }
    ConvGeom::new("conv2d", ic, h, wd, kh, kw, stride, pad)
}

fn check_bias<T: Real>(op: &'static str, bias: &[T], oc: usize) -> Result<(), TensorError> {
    if bias.len() != oc {
        return Err(TensorError::Shape {
            op,
            detail: format!("bias has {} entries for {oc} output channels", bias.len()),
        });
    }
    Ok(())
}

pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &[T],
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>, TensorError> {
    let g = conv2d_geom(x, w, stride, pad)?;
    let n = x.shape()[0];
    let oc = w.shape()[0];
    check_bias("conv2d", bias, oc)?;
    let np = n * g.positions();
    let col = im2col(x.data(), n, &g);
    let mut out_c = vec![T::zero(); oc * np];
    gemm(false, false, oc, np, g.patch_len(), T::one(), w.data(), &col, T::zero(), &mut out_c);
    let data = cnp_to_nchw(&out_c, n, oc, g.positions(), Some(bias));
    Tensor::new([n, oc, g.out_h, g.out_w], data)
}

/// Gradients of [`conv2d_forward`]: `(d_input, d_weight, d_bias)`.
pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &[T],
    stride: usize,
    pad: usize,
    need_input: bool,
) -> Result<(Option<Vec<T>>, Vec<T>, Vec<T>), TensorError> {
    let g = conv2d_geom(x, w, stride, pad)?;
    let n = x.shape()[0];
    let oc = w.shape()[0];
    let p = g.positions();
    let np = n * p;
    let k = g.patch_len();
    let gout_c = nchw_to_cnp(grad_out, n, oc, p);
    let col = im2col(x.data(), n, &g);
    let mut dw = vec![T::zero(); oc * k];
    gemm(false, true, oc, k, np, T::one(), &gout_c, &col, T::zero(), &mut dw);
    let db = row_sums(&gout_c, oc, np);
    let dx = need_input.then(|| {
        let mut dcol = vec![T::zero(); k * np];
        gemm(true, false, k, np, oc, T::one(), w.data(), &gout_c, T::zero(), &mut dcol);
        col2im(&dcol, n, &g)
    });
    Ok((dx, dw, db))
}

fn row_sums<T: Real>(m: &[T], rows: usize, cols: usize) -> Vec<T> {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().fold(T::zero(), |a, v| a + *v))
        .collect()
}

/// Output geometry of a transposed convolution, expressed as the geometry of
/// the matching forward convolution over the (larger) output image.
pub fn conv_transpose2d_geom(
    input: Shape,
    weight: Shape,
    stride: usize,
    pad: usize,
) -> Result<ConvGeom, TensorError> {
    let [_, ic, h, w] = input;
    let [wic, oc, kh, kw] = weight;
    if ic != wic {
        return Err(TensorError::Shape {
            op: "conv_transpose2d",
            detail: format!("input has {ic} channels but weight expects {wic}"),
        });
    }
    let out = |len: usize, k: usize| -> Result<usize, TensorError> {
        let v = (len as isize - 1) * stride as isize - 2 * pad as isize + k as isize;
        if len == 0 || v <= 0 {
            return Err(TensorError::EmptyOutput {
                op: "conv_transpose2d",
                detail: format!("computed output extent {v} from input extent {len}"),
            });
        }
        Ok(v as usize)
    };
    let (oh, ow) = (out(h, kh)?, out(w, kw)?);
    let g = ConvGeom::new("conv_transpose2d", oc, oh, ow, kh, kw, stride, pad)?;
    debug_assert_eq!((g.out_h, g.out_w), (h, w));
    Ok(g)
}

pub fn conv_transpose2d_forward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: &[T],
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>, TensorError> {
    let g = conv_transpose2d_geom(x.shape(), w.shape(), stride, pad)?;
    let [n, ic, h, wd] = x.shape();
    let oc = g.channels;
    check_bias("conv_transpose2d", bias, oc)?;
    let np = n * h * wd;
    let k = g.patch_len();
    let xc = nchw_to_cnp(x.data(), n, ic, h * wd);
    let mut cols = vec![T::zero(); k * np];
    gemm(true, false, k, np, ic, T::one(), w.data(), &xc, T::zero(), &mut cols);
    let mut data = col2im(&cols, n, &g);
    let plane = g.height * g.width;
    parallel::for_each_chunk_mut(&mut data, plane, |idx, dst| {
        let b = bias[idx % oc];
        dst.iter_mut().for_each(|v| *v = *v + b);
    });
    Tensor::new([n, oc, g.height, g.width], data)
}

/// Gradients of [`conv_transpose2d_forward`]: `(d_input, d_weight, d_bias)`.
pub fn conv_transpose2d_backward<T: Real>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    grad_out: &[T],
    stride: usize,
    pad: usize,
    need_input: bool,
) -> Result<(Option<Vec<T>>, Vec<T>, Vec<T>), TensorError> {
    let g = conv_transpose2d_geom(x.shape(), w.shape(), stride, pad)?;
    let [n, ic, h, wd] = x.shape();
    let oc = g.channels;
    let np = n * h * wd;
    let k = g.patch_len();
    let dcol = im2col(grad_out, n, &g);
    let xc = nchw_to_cnp(x.data(), n, ic, h * wd);
    let mut dw = vec![T::zero(); ic * k];
    gemm(false, true, ic, k, np, T::one(), &xc, &dcol, T::zero(), &mut dw);
    let db = channel_sums(grad_out, [n, oc, g.height, g.width]);
    let dx = need_input.then(|| {
        let mut dx_c = vec![T::zero(); ic * np];
        gemm(false, false, ic, np, k, T::one(), w.data(), &dcol, T::zero(), &mut dx_c);
        cnp_to_nchw(&dx_c, n, ic, h * wd, None)
    });
    Ok((dx, dw, db))
}

/// Saved values of a train-mode batchnorm forward.
#[derive(Clone, Debug)]
pub struct BatchNormSaved<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub mean: Vec<T>,
    /// Biased (population) variance of the batch.
    pub var: Vec<T>,
}

pub fn batchnorm_train_forward<T: Real>(
    x: &[T],
    shape: Shape,
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> Result<(Vec<T>, BatchNormSaved<T>), TensorError> {
    let [n, c, h, w] = shape;
    let plane = h * w;
    let count = n * plane;
    if count < 2 {
        return Err(TensorError::DegenerateBatchNorm { count });
    }
    let m = T::from_f64(count as f64);
    let stats: Vec<(T, T)> = parallel::map_range(c, |ci| {
        let mut sum = T::zero();
        for s in 0..n {
            for v in &x[(s * c + ci) * plane..][..plane] {
                sum = sum + *v;
            }
        }
        let mean = sum / m;
        let mut sq = T::zero();
        for s in 0..n {
            for v in &x[(s * c + ci) * plane..][..plane] {
                let d = *v - mean;
                sq = sq + d * d;
            }
        }
        (mean, sq / m)
    });
    let mean: Vec<T> = stats.iter().map(|s| s.0).collect();
    let var: Vec<T> = stats.iter().map(|s| s.1).collect();
    let inv_std: Vec<T> = var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    parallel::for_each_chunk_mut(&mut xhat, plane, |idx, dst| {
        let ci = idx % c;
        for (d, v) in dst.iter_mut().zip(&x[idx * plane..][..plane]) {
            *d = (*v - mean[ci]) * inv_std[ci];
        }
    });
    let mut y = vec![T::zero(); x.len()];
    parallel::for_each_chunk_mut(&mut y, plane, |idx, dst| {
        let ci = idx % c;
        for (d, v) in dst.iter_mut().zip(&xhat[idx * plane..][..plane]) {
            *d = gamma[ci] * *v + beta[ci];
        }
    });
    Ok((
        y,
        BatchNormSaved {
            xhat,
            inv_std,
            mean,
            var,
        },
    ))
}

/// `(d_input, d_gamma, d_beta)` for train-mode batchnorm.
pub fn batchnorm_train_backward<T: Real>(
    grad_out: &[T],
    shape: Shape,
    gamma: &[T],
    saved: &BatchNormSaved<T>,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let [n, c, h, w] = shape;
    let plane = h * w;
    let m = T::from_f64((n * plane) as f64);
    let sums: Vec<(T, T)> = parallel::map_range(c, |ci| {
        let mut sdy = T::zero();
        let mut sdyx = T::zero();
        for s in 0..n {
            let off = (s * c + ci) * plane;
            for (dy, xh) in grad_out[off..off + plane].iter().zip(&saved.xhat[off..off + plane]) {
                sdy = sdy + *dy;
                sdyx = sdyx + *dy * *xh;
            }
        }
        (sdy, sdyx)
    });
    let mut dx = vec![T::zero(); grad_out.len()];
    parallel::for_each_chunk_mut(&mut dx, plane, |idx, dst| {
        let ci = idx % c;
        let (sdy, sdyx) = sums[ci];
        let scale = gamma[ci] * saved.inv_std[ci] / m;
        let off = idx * plane;
        for ((d, dy), xh) in dst
            .iter_mut()
            .zip(&grad_out[off..off + plane])
            .zip(&saved.xhat[off..off + plane])
        {
            *d = scale * (m * *dy - sdy - *xh * sdyx);
        }
    });
    let dgamma = sums.iter().map(|s| s.1).collect();
    let dbeta = sums.iter().map(|s| s.0).collect();
    (dx, dgamma, dbeta)
}

/// Direct-loop convolutions. Slow; kept as the reference the GEMM path is
/// tested and benchmarked against.
pub mod reference {
    use super::super::{Real, Tensor};
    use crate::error::TensorError;

    pub fn conv2d<T: Real>(
        x: &Tensor<T>,
        w: &Tensor<T>,
        bias: &[T],
        stride: usize,
        pad: usize,
    ) -> Result<Tensor<T>, TensorError> {
        let g = super::conv2d_geom(x, w, stride, pad)?;
        let [n, ic, h, wd] = x.shape();
        let [oc, _, kh, kw] = w.shape();
        let mut out = Tensor::zeros([n, oc, g.out_h, g.out_w]);
        let od = out.data_mut();
        for s in 0..n {
            for o in 0..oc {
                for oy in 0..g.out_h {
                    for ox in 0..g.out_w {
                        let mut acc = bias[o];
                        for c in 0..ic {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= wd {
                                        continue;
                                    }
                                    let xv = x.data()[((s * ic + c) * h + iy as usize) * wd + ix as usize];
                                    let wv = w.data()[((o * ic + c) * kh + ky) * kw + kx];
                                    acc = acc + xv * wv;
                                }
                            }
                        }
                        od[((s * oc + o) * g.out_h + oy) * g.out_w + ox] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn conv_transpose2d<T: Real>(
        x: &Tensor<T>,
        w: &Tensor<T>,
        bias: &[T],
        stride: usize,
        pad: usize,
    ) -> Result<Tensor<T>, TensorError> {
        let g = super::conv_transpose2d_geom(x.shape(), w.shape(), stride, pad)?;
        let [n, ic, h, wd] = x.shape();
        let [_, oc, kh, kw] = w.shape();
        let (oh, ow) = (g.height, g.width);
        let mut out = Tensor::zeros([n, oc, oh, ow]);
        let od = out.data_mut();
        for s in 0..n {
            for o in 0..oc {
                for v in &mut od[(s * oc + o) * oh * ow..][..oh * ow] {
                    *v = bias[o];
                }
            }
            for c in 0..ic {
                for iy in 0..h {
                    for ix in 0..wd {
                        let xv = x.data()[((s * ic + c) * h + iy) * wd + ix];
                        for o in 0..oc {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let oy = (iy * stride + ky) as isize - pad as isize;
                                    let ox = (ix * stride + kx) as isize - pad as isize;
                                    if oy < 0 || ox < 0 || oy as usize >= oh || ox as usize >= ow {
                                        continue;
                                    }
                                    let wv = w.data()[((c * oc + o) * kh + ky) * kw + kx];
                                    od[((s * oc + o) * oh + oy as usize) * ow + ox as usize] =
                                        od[((s * oc + o) * oh + oy as usize) * ow + ox as usize] + xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random(shape: Shape, rng: &mut Rng) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.normal(0.0, 1.0))
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn hand_computed_conv() {
        let x = Tensor::new([1, 1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let w = Tensor::new([1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let y = conv2d_forward(&x, &w, &[0.0], 1, 0).unwrap();
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[6.0, 8.0, 12.0, 14.0]);
    }

    #[test]
    fn gemm_path_matches_direct_loops() {
        let mut rng = Rng::new(3);
        for &(ic, oc, h, k, s, p) in &[(2, 3, 5, 3, 1, 1), (3, 2, 8, 4, 2, 1), (1, 4, 4, 2, 2, 0)] {
            let x = random([2, ic, h, h], &mut rng);
            let w = random([oc, ic, k, k], &mut rng);
            let b: Vec<f64> = (0..oc).map(|_| rng.normal(0.0, 1.0)).collect();
            let fast = conv2d_forward(&x, &w, &b, s, p).unwrap();
            let slow = reference::conv2d(&x, &w, &b, s, p).unwrap();
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-10);
            }
            let xt = random([2, oc, h, h], &mut rng);
            let wt = random([oc, ic, k, k], &mut rng);
            let bt: Vec<f64> = (0..ic).map(|_| rng.normal(0.0, 1.0)).collect();
            let fast = conv_transpose2d_forward(&xt, &wt, &bt, s, p).unwrap();
            let slow = reference::conv_transpose2d(&xt, &wt, &bt, s, p).unwrap();
            assert_eq!(fast.shape(), slow.shape());
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn conv_input_gradient_is_the_adjoint() {
        let mut rng = Rng::new(11);
        let x = random([2, 3, 6, 6], &mut rng);
        let w = random([4, 3, 4, 4], &mut rng);
        let y = conv2d_forward(&x, &w, &[0.0; 4], 2, 1).unwrap();
        let u = random(y.shape(), &mut rng);
        let (dx, _, _) = conv2d_backward(&x, &w, u.data(), 2, 1, true).unwrap();
        let lhs = dot(y.data(), u.data());
        let rhs = dot(x.data(), &dx.unwrap());
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs().max(1.0));
    }

    #[test]
    fn transposed_conv_forward_equals_conv_vjp() {
        let mut rng = Rng::new(5);
        let u = Tensor::from_fn([2, 4, 3, 3], |_| rng.normal(0.0, 1.0) as f32);
        let w = Tensor::from_fn([4, 2, 4, 4], |_| rng.normal(0.0, 1.0) as f32);
        let x = Tensor::<f32>::zeros([2, 2, 6, 6]);
        let (dx, _, _) = conv2d_backward(&x, &w, u.data(), 2, 1, true).unwrap();
        let t = conv_transpose2d_forward(&u, &w, &[0.0; 2], 2, 1).unwrap();
        assert_eq!(t.shape(), [2, 2, 6, 6]);
        assert_eq!(t.data(), &dx.unwrap()[..]);
    }

    #[test]
    fn geometry_errors() {
        let x = Tensor::<f32>::zeros([1, 2, 3, 3]);
        let w = Tensor::<f32>::zeros([1, 3, 2, 2]);
        assert!(matches!(conv2d_forward(&x, &w, &[0.0], 1, 0), Err(TensorError::Shape { .. })));
        let w = Tensor::<f32>::zeros([1, 2, 5, 5]);
        assert!(matches!(
            conv2d_forward(&x, &w, &[0.0], 1, 0),
            Err(TensorError::EmptyOutput { .. })
        ));
        let x = Tensor::<f32>::zeros([1, 1, 1, 1]);
        let w = Tensor::<f32>::zeros([1, 1, 1, 1]);
        assert!(conv_transpose2d_forward(&x, &w, &[0.0], 1, 1).is_err());
    }
}
