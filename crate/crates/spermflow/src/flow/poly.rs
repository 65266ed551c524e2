//! Quadratic polynomial expansion: per-pixel weighted least-squares fit of
//! `f(x) ~ x'Ax + b'x + c` over a Gaussian-weighted neighborhood.

use nalgebra::{SMatrix, SVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::media::GrayFrame;

use super::FarnebackParams;

/// Number of coefficients stored per pixel: (c, b1, b2, a11, a12, a22).
pub const COEFFS: usize = 6;

/// Per-pixel local quadratic models of a frame.
///
/// Layout is row-major with a stride of [`COEFFS`] floats per pixel in the
/// order `(c, b1, b2, a11, a12, a22)`; `A` is symmetric so only three of its
/// entries are stored.
#[derive(Debug, Clone)]
pub struct PolyExpansion {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl PolyExpansion {
    #[inline]
    pub fn coeffs(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * COEFFS;
        &self.data[i..i + COEFFS]
    }

    /// Bilinear sample of the (b1, b2, a11, a12, a22) planes at a float
    /// position, clamped to the frame (edge replication).
    #[inline]
    pub fn sample_motion_coeffs(&self, fx: f32, fy: f32) -> [f32; 5] {
        let fx = fx.clamp(0.0, (self.width - 1) as f32);
        let fy = fy.clamp(0.0, (self.height - 1) as f32);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f32;
        let ty = fy - y0 as f32;
        let p00 = self.coeffs(x0, y0);
        let p10 = self.coeffs(x1, y0);
        let p01 = self.coeffs(x0, y1);
        let p11 = self.coeffs(x1, y1);
        let mut out = [0f32; 5];
        for (k, o) in out.iter_mut().enumerate() {
            let c = k + 1; // skip the constant term
            let top = p00[c] * (1.0 - tx) + p10[c] * tx;
            let bot = p01[c] * (1.0 - tx) + p11[c] * tx;
            *o = top * (1.0 - ty) + bot * ty;
        }
        out
    }
}

/// Precomputed window machinery shared by every pixel: Gaussian-weighted
/// basis taps and the inverse normal-equation matrix.
struct ExpansionKernel {
    n: i32,
    /// For each window offset, `w * (1, dx, dy, dx^2, dy^2, dx*dy)`.
    taps: Vec<(i32, i32, [f64; 6])>,
    g_inv: SMatrix<f64, 6, 6>,
}

impl ExpansionKernel {
    fn new(poly_n: usize, poly_sigma: f64) -> Result<Self> {
        let n = (poly_n / 2) as i32;
        let mut taps = Vec::with_capacity(poly_n * poly_n);
        let mut g = SMatrix::<f64, 6, 6>::zeros();
        for dy in -n..=n {
            for dx in -n..=n {
                let w = (-((dx * dx + dy * dy) as f64) / (2.0 * poly_sigma * poly_sigma)).exp();
                let b = basis(dx as f64, dy as f64);
                let mut wb = [0f64; 6];
                for i in 0..6 {
                    wb[i] = w * b[i];
                    for j in 0..6 {
                        g[(i, j)] += w * b[i] * b[j];
                    }
                }
                taps.push((dx, dy, wb));
            }
        }
        let g_inv = g
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("singular expansion normal matrix".into()))?;
        Ok(Self { n, taps, g_inv })
    }
}

#[inline]
fn basis(dx: f64, dy: f64) -> [f64; 6] {
    [1.0, dx, dy, dx * dx, dy * dy, dx * dy]
}

/// Fits the local quadratic model at every pixel.
///
/// The window is `poly_n` pixels square with Gaussian applicability of
/// standard deviation `poly_sigma`; borders are handled by edge replication.
/// Signals that are genuinely quadratic in (x, y) are reproduced exactly at
/// interior pixels.
pub fn polynomial_expansion(frame: &GrayFrame, params: &FarnebackParams) -> Result<PolyExpansion> {
    params.validate()?;
    if frame.width < params.poly_n || frame.height < params.poly_n {
        return Err(Error::FrameTooSmall {
            got: (frame.width, frame.height),
            need: params.poly_n,
        });
    }
    let kernel = ExpansionKernel::new(params.poly_n, params.poly_sigma)?;
    let w = frame.width;
    let h = frame.height;
    let mut data = vec![0f32; w * h * COEFFS];

    data.par_chunks_mut(w * COEFFS)
        .enumerate()
        .for_each(|(y, row)| {
            let y = y as i32;
            for x in 0..w as i32 {
                let mut proj = [0f64; 6];
                for (dx, dy, wb) in &kernel.taps {
                    let sx = (x + dx).clamp(0, w as i32 - 1) as usize;
                    let sy = (y + dy).clamp(0, h as i32 - 1) as usize;
                    let f = frame.data[sy * w + sx] as f64;
                    for i in 0..6 {
                        proj[i] += wb[i] * f;
                    }
                }
                let r = kernel.g_inv * SVector::<f64, 6>::from_column_slice(&proj);
                let out = &mut row[x as usize * COEFFS..x as usize * COEFFS + COEFFS];
                out[0] = r[0] as f32; // c
                out[1] = r[1] as f32; // b1 (x)
                out[2] = r[2] as f32; // b2 (y)
                out[3] = r[3] as f32; // a11 (x^2)
                out[4] = (r[5] / 2.0) as f32; // a12 (the xy coefficient is 2*a12)
                out[5] = r[4] as f32; // a22 (y^2)
            }
        });
    let _ = kernel.n;

    Ok(PolyExpansion {
        width: w,
        height: h,
        data,
    })
}
