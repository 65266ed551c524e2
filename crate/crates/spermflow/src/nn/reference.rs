//! Brute-force reference implementations used as oracles in tests. These are
//! deliberately written as plain nested loops, independent of the im2col/GEMM
//! path they check.

use crate::error::Result;

use super::scalar::Scalar;
use super::tensor::Tensor;

/// Quadruple-loop direct cross-correlation.
pub fn direct_conv2d<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let (n, c, h, w) = input.dims4()?;
    let ws = weight.shape();
    let (k_out, kh, kw) = (ws[0], ws[2], ws[3]);
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    let mut out = Tensor::zeros(&[n, k_out, oh, ow]);
    for ni in 0..n {
        for ko in 0..k_out {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = T::zero();
                    for ci in 0..c {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let iy = (oy * stride + ki) as isize - padding as isize;
                                let ix = (ox * stride + kj) as isize - padding as isize;
                                if iy < 0 || iy >= h as isize || ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let x = input.data()
                                    [((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                let wv = weight.data()[((ko * c + ci) * kh + ki) * kw + kj];
                                acc += x * wv;
                            }
                        }
                    }
                    out.data_mut()[((ni * k_out + ko) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Ok(out)
}
