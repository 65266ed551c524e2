//! Functional forward/backward kernels for the layers the ResNet family
//! needs. Every kernel has a fixed summation order so results are
//! bit-identical regardless of thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::scalar::Scalar;
use super::tensor::Tensor;

// ---------------------------------------------------------------------------
// GEMM
// ---------------------------------------------------------------------------

/// `c += a @ b` with `a: [m, k]`, `b: [k, n]`, `c: [m, n]`, all row-major.
///
/// Each output element is accumulated over `k` in ascending order by exactly
/// one thread, so the result does not depend on the parallel split.
pub(crate) fn gemm_nn_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let serial = m * k * n < 1 << 16;
    let body = |(block, c_block): (usize, &mut [T])| {
        let rows = c_block.len() / n;
        let i0 = block * block_rows(m);
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            for r in 0..rows {
                let aik = a[(i0 + r) * k + kk];
                let c_row = &mut c_block[r * n..(r + 1) * n];
                for (cv, bv) in c_row.iter_mut().zip(b_row) {
                    *cv += aik * *bv;
                }
            }
        }
    };
    if serial {
        body((0, c));
    } else {
        c.par_chunks_mut(block_rows(m) * n).enumerate().for_each(body);
    }
}

fn block_rows(m: usize) -> usize {
    let threads = rayon::current_num_threads().max(1);
    (m + threads * 4 - 1) / (threads * 4).max(1)
}

/// `c += a @ b^T` with `a: [m, k]`, `b: [n, k]`, `c: [m, n]`.
pub(crate) fn gemm_nt_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(c.len(), m * n);
    let serial = m * k * n < 1 << 16;
    let body = |(block, c_block): (usize, &mut [T])| {
        let rows = c_block.len() / n;
        let i0 = block * block_rows(m);
        for r in 0..rows {
            let a_row = &a[(i0 + r) * k..(i0 + r + 1) * k];
            for j in 0..n {
                let b_row = &b[j * k..(j + 1) * k];
                let mut acc = T::zero();
                for (av, bv) in a_row.iter().zip(b_row) {
                    acc += *av * *bv;
                }
                c_block[r * n + j] += acc;
            }
        }
    };
    if serial {
        body((0, c));
    } else {
        c.par_chunks_mut(block_rows(m) * n).enumerate().for_each(body);
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Output spatial size under floor semantics: `(dim + 2p - k) / s + 1`.
#[inline]
pub fn conv_out_dim(dim: usize, k: usize, stride: usize, padding: usize) -> Result<usize> {
    if dim + 2 * padding < k {
        return Err(Error::shape(
            "conv2d",
            format!("input dim {dim} (+2*{padding}) smaller than kernel {k}"),
        ));
    }
    Ok((dim + 2 * padding - k) / stride + 1)
}

fn check_conv_shapes<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize, usize, usize, usize, usize, usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    let ws = weight.shape();
    if ws.len() != 4 {
        return Err(Error::shape("conv2d", format!("weight rank {:?}", ws)));
    }
    let (k_out, wc, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if wc != c {
        return Err(Error::shape(
            "conv2d",
            format!("input channels {c} != weight channels {wc}"),
        ));
    }
    if stride == 0 {
        return Err(Error::InvalidParameter("conv2d stride 0".into()));
    }
    let oh = conv_out_dim(h, kh, stride, padding)?;
    let ow = conv_out_dim(w, kw, stride, padding)?;
    Ok((n, c, h, w, k_out, kh, kw, oh, ow))
}

/// Geometry of one conv application, shared by the kernels below.
#[derive(Clone, Copy)]
struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn ckk(&self) -> usize {
        self.c * self.kh * self.kw
    }
    fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

/// Reusable conv workspaces, kept by the layer to avoid reallocating tens of
/// megabytes per step.
#[derive(Debug, Clone, Default)]
pub struct ConvScratch<T: Scalar> {
    col: Vec<T>,
    aux: Vec<T>,
}

fn ensure_len<T: Scalar>(buf: &mut Vec<T>, len: usize) {
    if buf.len() < len {
        buf.resize(len, T::zero());
    }
}

/// Unpacks one sample into rows of kernel taps: `col[p][r]` where `p` is the
/// output position and `r` runs over (channel, ky, kx). Out-of-frame taps
/// are zero.
fn im2col_rows<T: Scalar>(input: &[T], g: ConvGeom, col: &mut [T]) {
    let ckk = g.ckk();
    for oy in 0..g.oh {
        let iy0 = (oy * g.stride) as isize - g.padding as isize;
        for ox in 0..g.ow {
            let ix0 = (ox * g.stride) as isize - g.padding as isize;
            let row = &mut col[(oy * g.ow + ox) * ckk..][..ckk];
            let mut r = 0;
            let x_interior = ix0 >= 0 && ix0 + g.kw as isize <= g.w as isize;
            for ci in 0..g.c {
                let plane = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
                for ki in 0..g.kh {
                    let iy = iy0 + ki as isize;
                    if iy < 0 || iy >= g.h as isize {
                        row[r..r + g.kw].iter_mut().for_each(|v| *v = T::zero());
                        r += g.kw;
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    if x_interior {
                        row[r..r + g.kw]
                            .copy_from_slice(&src[ix0 as usize..ix0 as usize + g.kw]);
                        r += g.kw;
                    } else {
                        for kj in 0..g.kw {
                            let ix = ix0 + kj as isize;
                            row[r] = if ix < 0 || ix >= g.w as isize {
                                T::zero()
                            } else {
                                src[ix as usize]
                            };
                            r += 1;
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add of tap-row gradients back into the input layout.
fn col2im_rows_add<T: Scalar>(col: &[T], g: ConvGeom, out: &mut [T]) {
    let ckk = g.ckk();
    for oy in 0..g.oh {
        let iy0 = (oy * g.stride) as isize - g.padding as isize;
        for ox in 0..g.ow {
            let ix0 = (ox * g.stride) as isize - g.padding as isize;
            let row = &col[(oy * g.ow + ox) * ckk..][..ckk];
            let mut r = 0;
            for ci in 0..g.c {
                let plane = &mut out[ci * g.h * g.w..(ci + 1) * g.h * g.w];
                for ki in 0..g.kh {
                    let iy = iy0 + ki as isize;
                    if iy < 0 || iy >= g.h as isize {
                        r += g.kw;
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for kj in 0..g.kw {
                        let ix = ix0 + kj as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += row[r];
                        }
                        r += 1;
                    }
                }
            }
        }
    }
}

/// Dot product in eight independent accumulator lanes. The lane layout is
/// fixed, so the summation order is identical on every run and machine
/// (it differs from a plain sequential sum by normal float reassociation).
#[inline]
fn dot_lanes<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 8];
    let mut ac = a.chunks_exact(8);
    let mut bc = b.chunks_exact(8);
    for (av, bv) in (&mut ac).zip(&mut bc) {
        for i in 0..8 {
            lanes[i] += av[i] * bv[i];
        }
    }
    let mut tail = T::zero();
    for (av, bv) in ac.remainder().iter().zip(bc.remainder()) {
        tail += *av * *bv;
    }
    let s0 = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    let s1 = (lanes[4] + lanes[5]) + (lanes[6] + lanes[7]);
    (s0 + s1) + tail
}

/// Positions handled per parallel task; fixed so results never depend on the
/// worker count.
const POS_CHUNK: usize = 1024;

/// Direct cross-correlation: `out[n,k] = sum_{c,i,j} w[k,c,i,j] x[n,c,...]`.
/// Each output element is a dot product over taps in ascending
/// (channel, ky, kx) order, matching the brute-force oracle exactly.
pub fn conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    conv2d_scratch(input, weight, stride, padding, &mut ConvScratch::default())
}

pub(crate) fn conv2d_scratch<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    scratch: &mut ConvScratch<T>,
) -> Result<Tensor<T>> {
    let (n, c, h, w, k_out, kh, kw, oh, ow) = check_conv_shapes(input, weight, stride, padding)?;
    let g = ConvGeom {
        c,
        h,
        w,
        kh,
        kw,
        stride,
        padding,
        oh,
        ow,
    };
    let ckk = g.ckk();
    let p_total = g.positions();
    let mut out = Tensor::zeros(&[n, k_out, oh, ow]);
    ensure_len(&mut scratch.col, ckk * p_total);
    ensure_len(&mut scratch.aux, p_total * k_out);
    let col = &mut scratch.col[..ckk * p_total];
    let tmp = &mut scratch.aux[..p_total * k_out];

    for ni in 0..n {
        im2col_rows(&input.data()[ni * c * h * w..(ni + 1) * c * h * w], g, col);
        // tmp[p][k] = dot(weight row k, col row p)
        let wdata = weight.data();
        tmp.par_chunks_mut(POS_CHUNK * k_out)
            .enumerate()
            .for_each(|(chunk, tchunk)| {
                let p0 = chunk * POS_CHUNK;
                for (pi, trow) in tchunk.chunks_mut(k_out).enumerate() {
                    let crow = &col[(p0 + pi) * ckk..(p0 + pi + 1) * ckk];
                    for (ko, t) in trow.iter_mut().enumerate() {
                        let wrow = &wdata[ko * ckk..(ko + 1) * ckk];
                        *t = dot_lanes(wrow, crow);
                    }
                }
            });
        // transpose [p][k] -> [k][p]
        let out_n = &mut out.data_mut()[ni * k_out * p_total..(ni + 1) * k_out * p_total];
        for ko in 0..k_out {
            for p in 0..p_total {
                out_n[ko * p_total + p] = tmp[p * k_out + ko];
            }
        }
    }
    Ok(out)
}

/// Spread of the weight-gradient reduction; fixed size keeps the summation
/// grouping identical for any worker count.
const DW_CHUNK: usize = 4096;

/// Exact gradients of [`conv2d`] with respect to input and weight.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    conv2d_backward_scratch(
        input,
        weight,
        grad_out,
        stride,
        padding,
        &mut ConvScratch::default(),
    )
}

pub(crate) fn conv2d_backward_scratch<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: usize,
    padding: usize,
    scratch: &mut ConvScratch<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c, h, w, k_out, kh, kw, oh, ow) = check_conv_shapes(input, weight, stride, padding)?;
    if grad_out.shape() != [n, k_out, oh, ow] {
        return Err(Error::shape(
            "conv2d_backward",
            format!("grad shape {:?}", grad_out.shape()),
        ));
    }
    let g = ConvGeom {
        c,
        h,
        w,
        kh,
        kw,
        stride,
        padding,
        oh,
        ow,
    };
    let ckk = g.ckk();
    let p_total = g.positions();
    let mut d_input = Tensor::zeros(input.shape());
    let mut d_weight = Tensor::zeros(weight.shape());
    ensure_len(&mut scratch.col, ckk * p_total);
    ensure_len(&mut scratch.aux, ckk * p_total);

    let wdata = weight.data();
    for ni in 0..n {
        let col = &mut scratch.col[..ckk * p_total];
        im2col_rows(&input.data()[ni * c * h * w..(ni + 1) * c * h * w], g, col);
        let gout = &grad_out.data()[ni * k_out * p_total..(ni + 1) * k_out * p_total];

        // dW: partial sums over fixed-size position blocks, reduced in order.
        let col_ref: &[T] = col;
        let partials: Vec<Vec<T>> = (0..p_total.div_ceil(DW_CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let p0 = chunk * DW_CHUNK;
                let p1 = (p0 + DW_CHUNK).min(p_total);
                let mut part = vec![T::zero(); k_out * ckk];
                for p in p0..p1 {
                    let crow = &col_ref[p * ckk..(p + 1) * ckk];
                    for ko in 0..k_out {
                        let gv = gout[ko * p_total + p];
                        if gv == T::zero() {
                            continue;
                        }
                        let prow = &mut part[ko * ckk..(ko + 1) * ckk];
                        for (pw, cv) in prow.iter_mut().zip(crow) {
                            *pw += gv * *cv;
                        }
                    }
                }
                part
            })
            .collect();
        for part in partials {
            for (dw, pv) in d_weight.data_mut().iter_mut().zip(&part) {
                *dw += *pv;
            }
        }

        // d(col): each tap row is a weighted sum of weight rows.
        let dcol = &mut scratch.aux[..ckk * p_total];
        dcol.par_chunks_mut(POS_CHUNK * ckk)
            .enumerate()
            .for_each(|(chunk, dchunk)| {
                let p0 = chunk * POS_CHUNK;
                for (pi, drow) in dchunk.chunks_mut(ckk).enumerate() {
                    let p = p0 + pi;
                    drow.iter_mut().for_each(|v| *v = T::zero());
                    for ko in 0..k_out {
                        let gv = gout[ko * p_total + p];
                        if gv == T::zero() {
                            continue;
                        }
                        let wrow = &wdata[ko * ckk..(ko + 1) * ckk];
                        for (d, wv) in drow.iter_mut().zip(wrow) {
                            *d += gv * *wv;
                        }
                    }
                }
            });
        col2im_rows_add(
            dcol,
            g,
            &mut d_input.data_mut()[ni * c * h * w..(ni + 1) * c * h * w],
        );
    }
    Ok((d_input, d_weight))
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Values cached by the train-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T: Scalar> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub dims: (usize, usize, usize, usize),
}

fn bn_check<T: Scalar>(input: &Tensor<T>, gamma: &Tensor<T>, beta: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let (n, c, h, w) = input.dims4()?;
    if gamma.numel() != c || beta.numel() != c {
        return Err(Error::shape(
            "batch_norm2d",
            format!("gamma/beta size != channels {c}"),
        ));
    }
    Ok((n, c, h, w))
}

/// Train-mode batch norm: normalize by batch statistics (biased variance,
/// eps added under the square root) and update running statistics with the
/// given momentum (`new = (1-m)*old + m*batch`, unbiased variance).
pub fn batch_norm2d_train<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &mut [T],
    running_var: &mut [T],
    momentum: f64,
    eps: f64,
) -> Result<(Tensor<T>, BnCache<T>)> {
    let (n, c, h, w) = bn_check(input, gamma, beta)?;
    let m = n * h * w;
    let plane = h * w;
    let mut out = Tensor::zeros(input.shape());
    let mut xhat = vec![T::zero(); input.numel()];
    let mut inv_std = vec![T::zero(); c];

    for ci in 0..c {
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for ni in 0..n {
            let base = ni * c * plane + ci * plane;
            for v in &input.data()[base..base + plane] {
                let x = v.as_f64();
                sum += x;
                sum_sq += x * x;
            }
        }
        let mean = sum / m as f64;
        let var = (sum_sq / m as f64 - mean * mean).max(0.0);
        let istd = 1.0 / (var + eps).sqrt();
        inv_std[ci] = T::of_f64(istd);

        let var_running = if m > 1 {
            var * m as f64 / (m - 1) as f64
        } else {
            var
        };
        running_mean[ci] = T::of_f64((1.0 - momentum) * running_mean[ci].as_f64() + momentum * mean);
        running_var[ci] =
            T::of_f64((1.0 - momentum) * running_var[ci].as_f64() + momentum * var_running);

        let g = gamma.data()[ci];
        let b = beta.data()[ci];
        let mean_t = T::of_f64(mean);
        let istd_t = T::of_f64(istd);
        for ni in 0..n {
            let base = ni * c * plane + ci * plane;
            for i in base..base + plane {
                let xh = (input.data()[i] - mean_t) * istd_t;
                xhat[i] = xh;
                out.data_mut()[i] = g * xh + b;
            }
        }
    }
    Ok((
        out,
        BnCache {
            xhat,
            inv_std,
            dims: (n, c, h, w),
        },
    ))
}

/// Eval-mode batch norm using running statistics; a pure function.
pub fn batch_norm2d_eval<T: Scalar>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &[T],
    running_var: &[T],
    eps: f64,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = bn_check(input, gamma, beta)?;
    let plane = h * w;
    let mut out = Tensor::zeros(input.shape());
    for ci in 0..c {
        let istd = T::of_f64(1.0 / (running_var[ci].as_f64() + eps).sqrt());
        let mean = running_mean[ci];
        let g = gamma.data()[ci];
        let b = beta.data()[ci];
        for ni in 0..n {
            let base = ni * c * plane + ci * plane;
            for i in base..base + plane {
                out.data_mut()[i] = g * (input.data()[i] - mean) * istd + b;
            }
        }
    }
    Ok(out)
}

/// Backward through the train-mode normalization.
pub fn batch_norm2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &BnCache<T>,
    gamma: &Tensor<T>,
) -> Result<(Tensor<T>, Vec<T>, Vec<T>)> {
    let (n, c, h, w) = cache.dims;
    if grad_out.shape() != [n, c, h, w] {
        return Err(Error::shape(
            "batch_norm2d_backward",
            format!("grad shape {:?}", grad_out.shape()),
        ));
    }
    let m = (n * h * w) as f64;
    let plane = h * w;
    let mut d_input = Tensor::zeros(grad_out.shape());
    let mut d_gamma = vec![T::zero(); c];
    let mut d_beta = vec![T::zero(); c];

    for ci in 0..c {
        let mut sum_dy = 0.0f64;
        let mut sum_dy_xhat = 0.0f64;
        for ni in 0..n {
            let base = ni * c * plane + ci * plane;
            for i in base..base + plane {
                let dy = grad_out.data()[i].as_f64();
                sum_dy += dy;
                sum_dy_xhat += dy * cache.xhat[i].as_f64();
            }
        }
        d_beta[ci] = T::of_f64(sum_dy);
        d_gamma[ci] = T::of_f64(sum_dy_xhat);

        let scale = gamma.data()[ci].as_f64() * cache.inv_std[ci].as_f64();
        let mean_dy = sum_dy / m;
        let mean_dy_xhat = sum_dy_xhat / m;
        for ni in 0..n {
            let base = ni * c * plane + ci * plane;
            for i in base..base + plane {
                let dy = grad_out.data()[i].as_f64();
                let xh = cache.xhat[i].as_f64();
                d_input.data_mut()[i] = T::of_f64(scale * (dy - mean_dy - xh * mean_dy_xhat));
            }
        }
    }
    Ok((d_input, d_gamma, d_beta))
}

// ---------------------------------------------------------------------------
// Activations and pooling
// ---------------------------------------------------------------------------

/// ReLU; the returned mask records which elements passed through.
pub fn relu<T: Scalar>(input: &Tensor<T>) -> (Tensor<T>, Vec<bool>) {
    let mut out = Tensor::zeros(input.shape());
    let mut mask = vec![false; input.numel()];
    for i in 0..input.numel() {
        let v = input.data()[i];
        if v > T::zero() {
            out.data_mut()[i] = v;
            mask[i] = true;
        }
    }
    (out, mask)
}

pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, mask: &[bool]) -> Result<Tensor<T>> {
    if grad_out.numel() != mask.len() {
        return Err(Error::shape("relu_backward", "mask length"));
    }
    let mut out = Tensor::zeros(grad_out.shape());
    for i in 0..mask.len() {
        if mask[i] {
            out.data_mut()[i] = grad_out.data()[i];
        }
    }
    Ok(out)
}

/// Max pooling; ties resolve to the first maximum in row-major window order
/// so the backward scatter is deterministic. Returns flat argmax indices.
pub fn max_pool2d<T: Scalar>(
    input: &Tensor<T>,
    k: usize,
    stride: usize,
    padding: usize,
) -> Result<(Tensor<T>, Vec<u32>)> {
    let (n, c, h, w) = input.dims4()?;
    let oh = conv_out_dim(h, k, stride, padding)?;
    let ow = conv_out_dim(w, k, stride, padding)?;
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = vec![0u32; n * c * oh * ow];
    let mut oi = 0usize;
    for ni in 0..n {
        for ci in 0..c {
            let plane_base = (ni * c + ci) * h * w;
            let plane = &input.data()[plane_base..plane_base + h * w];
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = T::neg_infinity();
                    let mut best_idx = 0usize;
                    let mut found = false;
                    for ki in 0..k {
                        let iy = (oy * stride + ki) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kj in 0..k {
                            let ix = (ox * stride + kj) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let idx = iy as usize * w + ix as usize;
                            let v = plane[idx];
                            if !found || v > best {
                                best = v;
                                best_idx = idx;
                                found = true;
                            }
                        }
                    }
                    if !found {
                        return Err(Error::shape(
                            "max_pool2d",
                            "window entirely outside input",
                        ));
                    }
                    out.data_mut()[oi] = best;
                    argmax[oi] = (plane_base + best_idx) as u32;
                    oi += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn max_pool2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[u32],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if grad_out.numel() != argmax.len() {
        return Err(Error::shape("max_pool2d_backward", "argmax length"));
    }
    let mut out = Tensor::zeros(input_shape);
    for (g, &idx) in grad_out.data().iter().zip(argmax) {
        out.data_mut()[idx as usize] += *g;
    }
    Ok(out)
}

/// Global average pooling to 1x1 per channel.
pub fn adaptive_avg_pool<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let mut out = Tensor::zeros(&[n, c, 1, 1]);
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * plane;
            let mut acc = 0.0f64;
            for v in &input.data()[base..base + plane] {
                acc += v.as_f64();
            }
            out.data_mut()[ni * c + ci] = T::of_f64(acc / plane as f64);
        }
    }
    Ok(out)
}

pub fn adaptive_avg_pool_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    let (n, c, h, w) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    if grad_out.shape() != [n, c, 1, 1] {
        return Err(Error::shape(
            "adaptive_avg_pool_backward",
            format!("grad shape {:?}", grad_out.shape()),
        ));
    }
    let plane = h * w;
    let inv = T::of_f64(1.0 / plane as f64);
    let mut out = Tensor::zeros(input_shape);
    for ni in 0..n {
        for ci in 0..c {
            let g = grad_out.data()[ni * c + ci] * inv;
            let base = (ni * c + ci) * plane;
            out.data_mut()[base..base + plane]
                .iter_mut()
                .for_each(|v| *v = g);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

/// `out = input @ weight^T + bias` with `input: [n, f]`, `weight: [o, f]`.
pub fn linear<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, f) = input.dims2()?;
    let (o, wf) = weight.dims2()?;
    if wf != f || bias.numel() != o {
        return Err(Error::shape(
            "linear",
            format!("input [{n},{f}] weight [{o},{wf}] bias {}", bias.numel()),
        ));
    }
    let mut out = Tensor::zeros(&[n, o]);
    gemm_nt_acc(input.data(), weight.data(), out.data_mut(), n, f, o);
    for ni in 0..n {
        for oi in 0..o {
            out.data_mut()[ni * o + oi] += bias.data()[oi];
        }
    }
    Ok(out)
}

/// Gradients of [`linear`]: returns `(d_input, d_weight, d_bias)`.
pub fn linear_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Vec<T>)> {
    let (n, f) = input.dims2()?;
    let (o, _) = weight.dims2()?;
    if grad_out.shape() != [n, o] {
        return Err(Error::shape(
            "linear_backward",
            format!("grad shape {:?}", grad_out.shape()),
        ));
    }
    // d_input = g @ W
    let mut d_input = Tensor::zeros(&[n, f]);
    gemm_nn_acc(grad_out.data(), weight.data(), d_input.data_mut(), n, o, f);
    // d_weight = g^T @ input
    let mut g_t = vec![T::zero(); o * n];
    for ni in 0..n {
        for oi in 0..o {
            g_t[oi * n + ni] = grad_out.data()[ni * o + oi];
        }
    }
    let mut d_weight = Tensor::zeros(&[o, f]);
    gemm_nn_acc(&g_t, input.data(), d_weight.data_mut(), o, n, f);
    // d_bias = column sums of g
    let mut d_bias = vec![T::zero(); o];
    for ni in 0..n {
        for oi in 0..o {
            d_bias[oi] += grad_out.data()[ni * o + oi];
        }
    }
    Ok((d_input, d_weight, d_bias))
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: zero with probability `p`, scale survivors by
/// `1/(1-p)`. Returns the scaled mask so the backward pass reuses it
/// exactly. `p = 0` is the identity and draws nothing from the RNG.
pub fn dropout<T: Scalar, R: Rng>(input: &Tensor<T>, p: f64, rng: &mut R) -> Result<(Tensor<T>, Vec<T>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("dropout p {p} not in [0, 1)")));
    }
    if p == 0.0 {
        return Ok((input.clone(), vec![T::one(); input.numel()]));
    }
    let scale = T::of_f64(1.0 / (1.0 - p));
    let mut out = Tensor::zeros(input.shape());
    let mut mask = vec![T::zero(); input.numel()];
    for i in 0..input.numel() {
        if rng.random::<f64>() >= p {
            mask[i] = scale;
            out.data_mut()[i] = input.data()[i] * scale;
        }
    }
    Ok((out, mask))
}

pub fn dropout_backward<T: Scalar>(grad_out: &Tensor<T>, mask: &[T]) -> Result<Tensor<T>> {
    if grad_out.numel() != mask.len() {
        return Err(Error::shape("dropout_backward", "mask length"));
    }
    let mut out = Tensor::zeros(grad_out.shape());
    for i in 0..mask.len() {
        out.data_mut()[i] = grad_out.data()[i] * mask[i];
    }
    Ok(out)
}
