//! Dense optical flow: coarse-to-fine Farnebäck estimation built on
//! polynomial expansion, plus the HSV flow visualization.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::media::{GrayFrame, PixelFrame};

mod poly;
pub mod reference;

pub use poly::{polynomial_expansion, PolyExpansion, COEFFS};

/// Farnebäck estimation parameters.
///
/// The defaults `(0.5, 3, 15, 3, 5, 1.2)` are the widely published ones;
/// whatever is used ends up recorded in dataset manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FarnebackParams {
    /// Pyramid downscale ratio per level, in (0, 1).
    pub pyr_scale: f64,
    /// Number of pyramid levels (>= 1).
    pub levels: usize,
    /// Neighborhood-averaging window, odd, >= 3.
    pub winsize: usize,
    /// Displacement-update iterations per level.
    pub iterations: usize,
    /// Polynomial expansion window, 5 or 7.
    pub poly_n: usize,
    /// Gaussian applicability sigma for the expansion.
    pub poly_sigma: f64,
}

impl Default for FarnebackParams {
    fn default() -> Self {
        Self {
            pyr_scale: 0.5,
            levels: 3,
            winsize: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.2,
        }
    }
}

impl FarnebackParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pyr_scale > 0.0 && self.pyr_scale < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pyr_scale {} not in (0, 1)",
                self.pyr_scale
            )));
        }
        if self.levels < 1 {
            return Err(Error::InvalidParameter("levels must be >= 1".into()));
        }
        if self.winsize < 3 || self.winsize % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "winsize {} must be odd and >= 3",
                self.winsize
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if self.poly_n != 5 && self.poly_n != 7 {
            return Err(Error::InvalidParameter(format!(
                "poly_n {} must be 5 or 7",
                self.poly_n
            )));
        }
        if self.poly_sigma <= 0.0 {
            return Err(Error::InvalidParameter("poly_sigma must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-pixel displacement field in pixels. `(u, v)` maps content at `(x, y)`
/// in the first frame to `(x + u, y + v)` in the second.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().all(|v| v.is_finite()) && self.v.iter().all(|v| v.is_finite())
    }

    /// Median (u, v) over the whole field; used by tests and diagnostics.
    pub fn median(&self) -> (f32, f32) {
        (median_of(&self.u), median_of(&self.v))
    }
}

fn median_of(values: &[f32]) -> f32 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[sorted.len() / 2]
}

// ---------------------------------------------------------------------------
// Plane filters (edge replication everywhere)
// ---------------------------------------------------------------------------

/// Separable Gaussian blur with edge replication, kernel radius ceil(3 sigma).
pub(crate) fn gaussian_blur(frame: &GrayFrame, sigma: f64) -> GrayFrame {
    if sigma <= 0.0 {
        return frame.clone();
    }
    let radius = (3.0 * sigma).ceil() as i32;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0f64;
    for d in -radius..=radius {
        let w = (-(d * d) as f64 / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }

    let (w, h) = (frame.width as i32, frame.height as i32);
    let mut tmp = vec![0f32; frame.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, wk) in kernel.iter().enumerate() {
                let sx = (x + k as i32 - radius).clamp(0, w - 1);
                acc += wk * frame.data[(y * w + sx) as usize] as f64;
            }
            tmp[(y * w + x) as usize] = acc as f32;
        }
    }
    let mut out = vec![0f32; frame.data.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f64;
            for (k, wk) in kernel.iter().enumerate() {
                let sy = (y + k as i32 - radius).clamp(0, h - 1);
                acc += wk * tmp[(sy * w + x) as usize] as f64;
            }
            out[(y * w + x) as usize] = acc as f32;
        }
    }
    GrayFrame {
        width: frame.width,
        height: frame.height,
        data: out,
    }
}

/// Normalized box average over a (win x win) window with edge replication,
/// computed with prefix sums.
fn box_blur(plane: &[f32], w: usize, h: usize, win: usize) -> Vec<f32> {
    let r = (win / 2) as i64;
    let norm = 1.0 / (win * win) as f64;

    // Horizontal pass.
    let mut tmp = vec![0f64; w * h];
    let mut prefix = vec![0f64; w + 1];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            prefix[x + 1] = prefix[x] + row[x] as f64;
        }
        let last = row[w - 1] as f64;
        let first = row[0] as f64;
        for x in 0..w as i64 {
            let lo = x - r;
            let hi = x + r;
            let mut acc = prefix[(hi.min(w as i64 - 1) + 1) as usize] - prefix[lo.max(0) as usize];
            if lo < 0 {
                acc += (-lo) as f64 * first;
            }
            if hi > w as i64 - 1 {
                acc += (hi - (w as i64 - 1)) as f64 * last;
            }
            tmp[y * w + x as usize] = acc;
        }
    }

    // Vertical pass over the horizontal sums.
    let mut out = vec![0f32; w * h];
    let mut col_prefix = vec![0f64; h + 1];
    for x in 0..w {
        for y in 0..h {
            col_prefix[y + 1] = col_prefix[y] + tmp[y * w + x];
        }
        let first = tmp[x];
        let last = tmp[(h - 1) * w + x];
        for y in 0..h as i64 {
            let lo = y - r;
            let hi = y + r;
            let mut acc =
                col_prefix[(hi.min(h as i64 - 1) + 1) as usize] - col_prefix[lo.max(0) as usize];
            if lo < 0 {
                acc += (-lo) as f64 * first;
            }
            if hi > h as i64 - 1 {
                acc += (hi - (h as i64 - 1)) as f64 * last;
            }
            out[y as usize * w + x] = (acc * norm) as f32;
        }
    }
    out
}

fn resize_plane_f32(data: &[f32], w: usize, h: usize, ow: usize, oh: usize) -> Vec<f32> {
    let frame = GrayFrame {
        width: w,
        height: h,
        data: data.to_vec(),
    };
    // unwrap: dimensions are validated by callers
    crate::media::resize_bilinear_gray(&frame, ow, oh).unwrap().data
}

// ---------------------------------------------------------------------------
// Coarse-to-fine estimation
// ---------------------------------------------------------------------------

/// Estimates dense flow from `prev` to `next`.
///
/// A pyramid of `levels` levels at ratio `pyr_scale` is processed coarsest
/// first; each level runs `iterations` displacement updates on the
/// polynomial-expansion coefficients with (winsize x winsize) neighborhood
/// averaging of the normal equations. `initial`, when given, seeds the
/// coarsest level.
pub fn estimate_flow(
    prev: &GrayFrame,
    next: &GrayFrame,
    params: &FarnebackParams,
    initial: Option<&FlowField>,
) -> Result<FlowField> {
    params.validate()?;
    if prev.width != next.width || prev.height != next.height {
        return Err(Error::FlowInput(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width, prev.height, next.width, next.height
        )));
    }
    if !prev.data.iter().all(|v| v.is_finite()) || !next.data.iter().all(|v| v.is_finite()) {
        return Err(Error::FlowInput("non-finite input values".into()));
    }
    if prev.width < params.poly_n || prev.height < params.poly_n {
        return Err(Error::FrameTooSmall {
            got: (prev.width, prev.height),
            need: params.poly_n,
        });
    }

    // Level dimensions, finest first; levels below the expansion window are dropped.
    let mut dims = vec![(prev.width, prev.height)];
    for _ in 1..params.levels {
        let (w, h) = *dims.last().unwrap();
        let nw = (w as f64 * params.pyr_scale).round() as usize;
        let nh = (h as f64 * params.pyr_scale).round() as usize;
        if nw < params.poly_n || nh < params.poly_n {
            break;
        }
        dims.push((nw, nh));
    }

    let sigma = 0.6 * (1.0 / (params.pyr_scale * params.pyr_scale) - 1.0).sqrt();
    let build_pyramid = |frame: &GrayFrame| -> Vec<GrayFrame> {
        let mut pyr = vec![frame.clone()];
        for &(w, h) in dims.iter().skip(1) {
            let blurred = gaussian_blur(pyr.last().unwrap(), sigma);
            let resized = GrayFrame {
                width: w,
                height: h,
                data: resize_plane_f32(&blurred.data, blurred.width, blurred.height, w, h),
            };
            pyr.push(resized);
        }
        pyr
    };
    let pyr_prev = build_pyramid(prev);
    let pyr_next = build_pyramid(next);

    let coarsest = dims.len() - 1;
    let mut flow = match initial {
        Some(init) => {
            if init.width != prev.width || init.height != prev.height {
                return Err(Error::FlowInput("initial flow size mismatch".into()));
            }
            let (cw, ch) = dims[coarsest];
            let mut f = FlowField {
                width: cw,
                height: ch,
                u: resize_plane_f32(&init.u, init.width, init.height, cw, ch),
                v: resize_plane_f32(&init.v, init.width, init.height, cw, ch),
            };
            let su = cw as f32 / init.width as f32;
            let sv = ch as f32 / init.height as f32;
            f.u.iter_mut().for_each(|u| *u *= su);
            f.v.iter_mut().for_each(|v| *v *= sv);
            f
        }
        None => FlowField::zeros(dims[coarsest].0, dims[coarsest].1),
    };

    for level in (0..dims.len()).rev() {
        let (w, h) = dims[level];
        if (flow.width, flow.height) != (w, h) {
            let su = w as f32 / flow.width as f32;
            let sv = h as f32 / flow.height as f32;
            let mut up = FlowField {
                width: w,
                height: h,
                u: resize_plane_f32(&flow.u, flow.width, flow.height, w, h),
                v: resize_plane_f32(&flow.v, flow.width, flow.height, w, h),
            };
            up.u.iter_mut().for_each(|u| *u *= su);
            up.v.iter_mut().for_each(|v| *v *= sv);
            flow = up;
        }
        let e1 = polynomial_expansion(&pyr_prev[level], params)?;
        let e2 = polynomial_expansion(&pyr_next[level], params)?;
        for _ in 0..params.iterations {
            flow = displacement_update(&e1, &e2, &flow, params.winsize);
        }
    }
    debug_assert!(flow.is_finite());
    Ok(flow)
}

/// One Farnebäck displacement update: build per-pixel normal equations from
/// the two expansions under the current flow, average them over the window,
/// and solve the 2x2 system per pixel.
fn displacement_update(
    e1: &PolyExpansion,
    e2: &PolyExpansion,
    flow: &FlowField,
    winsize: usize,
) -> FlowField {
    let w = e1.width;
    let h = e1.height;
    let n = w * h;
    let mut g11 = vec![0f32; n];
    let mut g12 = vec![0f32; n];
    let mut g22 = vec![0f32; n];
    let mut h1 = vec![0f32; n];
    let mut h2 = vec![0f32; n];

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (du, dv) = (flow.u[i], flow.v[i]);
            let s = e2.sample_motion_coeffs(x as f32 + du, y as f32 + dv);
            let c1 = e1.coeffs(x, y);
            let a11 = 0.5 * (c1[3] + s[2]);
            let a12 = 0.5 * (c1[4] + s[3]);
            let a22 = 0.5 * (c1[5] + s[4]);
            let db1 = 0.5 * (c1[1] - s[0]) + a11 * du + a12 * dv;
            let db2 = 0.5 * (c1[2] - s[1]) + a12 * du + a22 * dv;
            g11[i] = a11 * a11 + a12 * a12;
            g12[i] = a11 * a12 + a12 * a22;
            g22[i] = a12 * a12 + a22 * a22;
            h1[i] = a11 * db1 + a12 * db2;
            h2[i] = a12 * db1 + a22 * db2;
        }
    }

    let g11 = box_blur(&g11, w, h, winsize);
    let g12 = box_blur(&g12, w, h, winsize);
    let g22 = box_blur(&g22, w, h, winsize);
    let h1 = box_blur(&h1, w, h, winsize);
    let h2 = box_blur(&h2, w, h, winsize);

    let mut out = FlowField::zeros(w, h);
    for i in 0..n {
        let det = g11[i] as f64 * g22[i] as f64 - g12[i] as f64 * g12[i] as f64;
        if det.abs() > 1e-12 {
            let u = (g22[i] as f64 * h1[i] as f64 - g12[i] as f64 * h2[i] as f64) / det;
            let v = (g11[i] as f64 * h2[i] as f64 - g12[i] as f64 * h1[i] as f64) / det;
            if u.is_finite() && v.is_finite() {
                out.u[i] = u as f32;
                out.v[i] = v as f32;
                continue;
            }
        }
        // Degenerate neighborhood (flat signal): keep the prior estimate.
        out.u[i] = flow.u[i];
        out.v[i] = flow.v[i];
    }
    out
}

// ---------------------------------------------------------------------------
// Visualization
// ---------------------------------------------------------------------------

/// HSV flow rendering: hue is the flow direction, saturation is full, value
/// is the magnitude min-max normalized over the field.
///
/// An all-zero field renders black; a field of equal nonzero magnitudes
/// renders at full value. The image is invariant to scaling every vector by
/// the same positive constant.
pub fn flow_to_rgb(flow: &FlowField) -> PixelFrame {
    let n = flow.width * flow.height;
    let mut mags = Vec::with_capacity(n);
    for i in 0..n {
        mags.push((flow.u[i].hypot(flow.v[i])) as f64);
    }
    let max = mags.iter().cloned().fold(0.0f64, f64::max);
    let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        let value = if max <= 0.0 {
            0.0
        } else if max > min {
            (mags[i] - min) / (max - min)
        } else {
            1.0
        };
        let hue = (flow.v[i] as f64)
            .atan2(flow.u[i] as f64)
            .rem_euclid(std::f64::consts::TAU)
            .to_degrees();
        let rgb = hsv_to_rgb(hue, 1.0, value);
        data.extend_from_slice(&rgb);
    }
    PixelFrame {
        width: flow.width,
        height: flow.height,
        data,
    }
}

/// `h` in degrees [0, 360), `s`, `v` in [0, 1].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((g + m) * 255.0).round().clamp(0.0, 255.0) as u8,
        ((b + m) * 255.0).round().clamp(0.0, 255.0) as u8,
    ]
}

// ---------------------------------------------------------------------------
// .flo debug dump
// ---------------------------------------------------------------------------

/// Writes the field in `.flo` layout: magic "PIEH", i32 width and height,
/// then row-major interleaved (u, v) f32, all little-endian.
pub fn write_flo(flow: &FlowField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    w.write_all(b"PIEH").map_err(io_err)?;
    w.write_i32::<LittleEndian>(flow.width as i32).map_err(io_err)?;
    w.write_i32::<LittleEndian>(flow.height as i32).map_err(io_err)?;
    for i in 0..flow.width * flow.height {
        w.write_f32::<LittleEndian>(flow.u[i]).map_err(io_err)?;
        w.write_f32::<LittleEndian>(flow.v[i]).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != b"PIEH" {
        return Err(Error::BadDataset {
            path: path.to_path_buf(),
            reason: "bad .flo magic".into(),
        });
    }
    let w = r.read_i32::<LittleEndian>().map_err(io_err)? as usize;
    let h = r.read_i32::<LittleEndian>().map_err(io_err)? as usize;
    let mut flow = FlowField::zeros(w, h);
    for i in 0..w * h {
        flow.u[i] = r.read_f32::<LittleEndian>().map_err(io_err)?;
        flow.v[i] = r.read_f32::<LittleEndian>().map_err(io_err)?;
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{shift_wrap, smoothed_noise};
    use proptest::prelude::*;

    #[test]
    fn identical_frames_give_zero_flow() {
        let frame = smoothed_noise(96, 96, 2.0, 7);
        let flow = estimate_flow(&frame, &frame, &FarnebackParams::default(), None).unwrap();
        let max = flow
            .u
            .iter()
            .chain(&flow.v)
            .fold(0f32, |m, &v| m.max(v.abs()));
        assert!(max <= 1e-3, "max |flow| = {max}");
    }

    #[test]
    fn recovers_integer_shift() {
        let prev = smoothed_noise(128, 128, 2.5, 42);
        let next = shift_wrap(&prev, 3, 1);
        let flow = estimate_flow(&prev, &next, &FarnebackParams::default(), None).unwrap();

        let margin = 16;
        let mut good = 0usize;
        let mut total = 0usize;
        for y in margin..128 - margin {
            for x in margin..128 - margin {
                let (u, v) = flow.at(x, y);
                total += 1;
                if (u - 3.0).abs() <= 0.5 && (v - 1.0).abs() <= 0.5 {
                    good += 1;
                }
            }
        }
        let frac = good as f64 / total as f64;
        assert!(frac >= 0.8, "only {frac:.3} of interior pixels within 0.5px");

        // Median agrees with exhaustive integer block matching.
        let (bm_u, bm_v) = reference::integer_block_match(&prev, &next, 6, margin);
        let (mu, mv) = flow.median();
        assert!((mu - bm_u as f32).abs() <= 0.5, "median u {mu} vs block match {bm_u}");
        assert!((mv - bm_v as f32).abs() <= 0.5, "median v {mv} vs block match {bm_v}");
    }

    #[test]
    fn negative_shift_median() {
        let prev = smoothed_noise(128, 128, 2.5, 11);
        let next = shift_wrap(&prev, -2, 0);
        let flow = estimate_flow(&prev, &next, &FarnebackParams::default(), None).unwrap();
        let (mu, mv) = flow.median();
        assert!((-2.5..=-1.5).contains(&mu), "median u = {mu}");
        assert!((-0.5..=0.5).contains(&mv), "median v = {mv}");
    }

    #[test]
    fn antisymmetry_on_translations() {
        for shift in [(1i32, 0i32), (3, 2), (-4, 1)] {
            let prev = smoothed_noise(96, 96, 2.5, 5);
            let next = shift_wrap(&prev, shift.0, shift.1);
            let fwd = estimate_flow(&prev, &next, &FarnebackParams::default(), None).unwrap();
            let bwd = estimate_flow(&next, &prev, &FarnebackParams::default(), None).unwrap();
            let (fu, fv) = fwd.median();
            let (bu, bv) = bwd.median();
            assert!(
                (fu + bu).abs() <= 0.5 && (fv + bv).abs() <= 0.5,
                "shift {shift:?}: fwd ({fu},{fv}) bwd ({bu},{bv})"
            );
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = GrayFrame::zeros(32, 32);
        let b = GrayFrame::zeros(32, 16);
        assert!(estimate_flow(&a, &b, &FarnebackParams::default(), None).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let a = GrayFrame::zeros(16, 16);
        let mut b = GrayFrame::zeros(16, 16);
        b.data[5] = f32::NAN;
        assert!(estimate_flow(&a, &b, &FarnebackParams::default(), None).is_err());
    }

    #[test]
    fn flow_to_rgb_zero_is_black() {
        let img = flow_to_rgb(&FlowField::zeros(4, 3));
        assert!(img.data.iter().all(|&b| b == 0));
    }

    #[test]
    fn flow_to_rgb_uniform_is_single_hue_red() {
        let mut flow = FlowField::zeros(4, 4);
        flow.u.iter_mut().for_each(|u| *u = 1.0);
        let img = flow_to_rgb(&flow);
        for px in img.data.chunks_exact(3) {
            assert_eq!(px, [255, 0, 0]); // hue 0 at full value
        }
    }

    #[test]
    fn flow_to_rgb_two_pixel_hues() {
        let flow = FlowField {
            width: 2,
            height: 1,
            u: vec![1.0, 0.0],
            v: vec![0.0, 1.0],
        };
        let img = flow_to_rgb(&flow);
        // hue 0 deg at value 255, and hue 90 deg at value 255
        assert_eq!(&img.data[0..3], &[255, 0, 0]);
        assert_eq!(&img.data[3..6], &[128, 255, 0]);
    }

    #[test]
    fn flo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.flo");
        let mut flow = FlowField::zeros(5, 4);
        for i in 0..20 {
            flow.u[i] = i as f32 * 0.5;
            flow.v[i] = -(i as f32);
        }
        write_flo(&flow, &path).unwrap();
        let back = read_flo(&path).unwrap();
        assert_eq!(flow, back);
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(16))]
        /// The rendering depends only on direction and relative magnitude.
        #[test]
        fn flow_to_rgb_scale_invariant(scale in 0.1f32..50.0, seed in 0u64..100) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut flow = FlowField::zeros(6, 6);
            for i in 0..36 {
                flow.u[i] = rng.random_range(-3.0f32..3.0);
                flow.v[i] = rng.random_range(-3.0f32..3.0);
            }
            let base = flow_to_rgb(&flow);
            let mut scaled = flow.clone();
            scaled.u.iter_mut().for_each(|u| *u *= scale);
            scaled.v.iter_mut().for_each(|v| *v *= scale);
            let img2 = flow_to_rgb(&scaled);
            // Allow one quantization step of difference from float rounding.
            for (a, b) in base.data.iter().zip(&img2.data) {
                prop_assert!((*a as i32 - *b as i32).abs() <= 1);
            }
        }
    }
}
