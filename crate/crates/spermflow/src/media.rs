//! Frame ingestion: decode frame sequences, grayscale conversion, bilinear resize.
//!
//! Video-codec demuxing is out of scope. A video is either a directory of
//! losslessly encoded images (`%06d.png` and friends, lexicographic order =
//! temporal order) or a raw `*.rgb24` stream with a JSON sidecar header.

use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BT.601 luma coefficients, the convention of common video tooling.
pub const LUMA_R: f32 = 0.299;
pub const LUMA_G: f32 = 0.587;
pub const LUMA_B: f32 = 0.114;

/// A decoded frame: row-major interleaved RGB, 8 bits per channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl PixelFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero dimension: {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidFrame(format!(
                "data length {} != {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// A single-channel frame with unit-interval float luma.
///
/// Luma is kept as float rather than 8-bit to avoid a second quantization
/// before optical-flow estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!(
                "zero dimension: {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

/// Sidecar header for raw RGB24 streams.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawStreamMeta {
    pub width: u32,
    pub height: u32,
    pub frames: u32,
}

#[derive(Debug, Clone)]
enum Backing {
    /// Ordered list of image files.
    ImageDir(Vec<PathBuf>),
    /// Raw interleaved RGB24 payload.
    RawStream(PathBuf),
}

/// An ordered, immutable sequence of frames sharing one size.
///
/// Sources are read-only after open; concurrent reads from multiple workers
/// are safe.
#[derive(Debug, Clone)]
pub struct VideoSource {
    pub id: String,
    pub frame_count: usize,
    /// (width, height) shared by every frame.
    pub frame_size: (usize, usize),
    backing: Backing,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "bmp", "ppm", "pgm", "pnm"];

/// Opens a frame-sequence directory or a raw `*.rgb24` stream.
///
/// For directories, files with lossless raster extensions are taken in
/// lexicographic (= temporal) order and all headers are checked for a
/// common size. For raw streams the `<name>.meta.json` sidecar must agree
/// with the payload length.
pub fn open_video(path: &Path) -> Result<VideoSource> {
    if path.is_dir() {
        open_image_dir(path)
    } else if path.extension().is_some_and(|e| e == "rgb24") {
        open_raw_stream(path)
    } else if path.exists() {
        Err(Error::InvalidFrame(format!(
            "{} is neither a frame directory nor a .rgb24 stream",
            path.display()
        )))
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such path"),
        ))
    }
}

fn open_image_dir(path: &Path) -> Result<VideoSource> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::NoFrames(path.to_path_buf()));
    }
    let first = image::image_dimensions(&files[0]).map_err(|e| Error::Image {
        path: files[0].clone(),
        source: e,
    })?;
    for (i, f) in files.iter().enumerate().skip(1) {
        let dims = image::image_dimensions(f).map_err(|e| Error::Image {
            path: f.clone(),
            source: e,
        })?;
        if dims != first {
            return Err(Error::InconsistentFrames {
                path: path.to_path_buf(),
                index: i,
                got: dims,
                expected: first,
            });
        }
    }
    Ok(VideoSource {
        id: video_id_of(path),
        frame_count: files.len(),
        frame_size: (first.0 as usize, first.1 as usize),
        backing: Backing::ImageDir(files),
    })
}

fn open_raw_stream(path: &Path) -> Result<VideoSource> {
    let meta_path = path.with_extension("meta.json");
    let meta_file = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: RawStreamMeta = serde_json::from_reader(meta_file).map_err(|e| {
        Error::BadDataset {
            path: meta_path.clone(),
            reason: format!("bad sidecar: {e}"),
        }
    })?;
    if meta.width == 0 || meta.height == 0 {
        return Err(Error::InvalidFrame("zero dimension in sidecar".into()));
    }
    let payload_len = std::fs::metadata(path)
        .map_err(|e| Error::io(path, e))?
        .len();
    let frame_bytes = meta.width as u64 * meta.height as u64 * 3;
    if meta.frames == 0 || payload_len == 0 {
        return Err(Error::NoFrames(path.to_path_buf()));
    }
    if payload_len != frame_bytes * meta.frames as u64 {
        return Err(Error::BadDataset {
            path: path.to_path_buf(),
            reason: format!(
                "payload is {payload_len} bytes, sidecar promises {} frames of {frame_bytes} bytes",
                meta.frames
            ),
        });
    }
    Ok(VideoSource {
        id: video_id_of(path),
        frame_count: meta.frames as usize,
        frame_size: (meta.width as usize, meta.height as usize),
        backing: Backing::RawStream(path.to_path_buf()),
    })
}

fn video_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Reads the `index`-th frame. Pure: same (source, index) yields the same bytes.
pub fn read_frame(src: &VideoSource, index: usize) -> Result<PixelFrame> {
    if index >= src.frame_count {
        return Err(Error::FrameOutOfRange {
            index,
            count: src.frame_count,
        });
    }
    let (w, h) = src.frame_size;
    match &src.backing {
        Backing::ImageDir(files) => {
            let img = image::open(&files[index]).map_err(|e| Error::Image {
                path: files[index].clone(),
                source: e,
            })?;
            let rgb = img.to_rgb8();
            if (rgb.width() as usize, rgb.height() as usize) != (w, h) {
                return Err(Error::InconsistentFrames {
                    path: files[index].clone(),
                    index,
                    got: (rgb.width(), rgb.height()),
                    expected: (w as u32, h as u32),
                });
            }
            PixelFrame::new(w, h, rgb.into_raw())
        }
        Backing::RawStream(path) => {
            let frame_bytes = w * h * 3;
            let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
            file.seek(SeekFrom::Start((index * frame_bytes) as u64))
                .map_err(|e| Error::io(path, e))?;
            let mut data = vec![0u8; frame_bytes];
            file.read_exact(&mut data).map_err(|e| Error::io(path, e))?;
            PixelFrame::new(w, h, data)
        }
    }
}

/// BT.601 grayscale: `(0.299 R + 0.587 G + 0.114 B) / 255`, unit interval.
pub fn to_grayscale(frame: &PixelFrame) -> GrayFrame {
    let mut data = Vec::with_capacity(frame.width * frame.height);
    for px in frame.data.chunks_exact(3) {
        let y = LUMA_R * px[0] as f32 + LUMA_G * px[1] as f32 + LUMA_B * px[2] as f32;
        data.push(y / 255.0);
    }
    GrayFrame {
        width: frame.width,
        height: frame.height,
        data,
    }
}

/// Source coordinate for a destination pixel under half-pixel-center mapping,
/// clamped to the valid range, returned as (left index, right weight).
#[inline]
fn bilinear_coord(dst: usize, scale: f64, src_len: usize) -> (usize, f64) {
    let pos = (dst as f64 + 0.5) * scale - 0.5;
    let pos = pos.clamp(0.0, (src_len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i0 = i0.min(src_len - 1);
    let frac = pos - i0 as f64;
    (i0, frac)
}

/// Bilinear resample of one row-major plane, generic over the accessor.
fn resize_plane<F>(src_w: usize, src_h: usize, out_w: usize, out_h: usize, get: F) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let sx = src_w as f64 / out_w as f64;
    let sy = src_h as f64 / out_h as f64;
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let (y0, fy) = bilinear_coord(oy, sy, src_h);
        let y1 = (y0 + 1).min(src_h - 1);
        for ox in 0..out_w {
            let (x0, fx) = bilinear_coord(ox, sx, src_w);
            let x1 = (x0 + 1).min(src_w - 1);
            let top = get(x0, y0) * (1.0 - fx) + get(x1, y0) * fx;
            let bot = get(x0, y1) * (1.0 - fx) + get(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Bilinear resize with half-pixel-center mapping. Output stays inside the
/// input's value range.
pub fn resize_bilinear_gray(frame: &GrayFrame, out_w: usize, out_h: usize) -> Result<GrayFrame> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParameter("zero output dimension".into()));
    }
    let vals = resize_plane(frame.width, frame.height, out_w, out_h, |x, y| {
        frame.at(x, y) as f64
    });
    Ok(GrayFrame {
        width: out_w,
        height: out_h,
        data: vals.into_iter().map(|v| v as f32).collect(),
    })
}

/// Bilinear resize of an RGB frame; channels are interpolated independently
/// and rounded back to 8 bits.
pub fn resize_bilinear_rgb(frame: &PixelFrame, out_w: usize, out_h: usize) -> Result<PixelFrame> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidParameter("zero output dimension".into()));
    }
    let mut channels = Vec::with_capacity(3);
    for c in 0..3 {
        channels.push(resize_plane(
            frame.width,
            frame.height,
            out_w,
            out_h,
            |x, y| frame.data[(y * frame.width + x) * 3 + c] as f64,
        ));
    }
    let mut data = Vec::with_capacity(out_w * out_h * 3);
    for i in 0..out_w * out_h {
        for plane in &channels {
            data.push(plane[i].round().clamp(0.0, 255.0) as u8);
        }
    }
    PixelFrame::new(out_w, out_h, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_png(path: &Path, frame: &PixelFrame) {
        let img = image::RgbImage::from_raw(
            frame.width as u32,
            frame.height as u32,
            frame.data.clone(),
        )
        .unwrap();
        img.save(path).unwrap();
    }

    #[test]
    fn open_image_dir_counts_frames() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..10 {
            let f = PixelFrame::filled(64, 48, [i as u8 * 20, 0, 0]);
            write_png(&dir.path().join(format!("{i:06}.png")), &f);
        }
        let src = open_video(dir.path()).unwrap();
        assert_eq!(src.frame_count, 10);
        assert_eq!(src.frame_size, (64, 48));
    }

    #[test]
    fn open_empty_dir_is_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        match open_video(dir.path()) {
            Err(Error::NoFrames(_)) => {}
            other => panic!("expected NoFrames, got {other:?}"),
        }
    }

    #[test]
    fn open_missing_path_errors() {
        assert!(open_video(Path::new("/nonexistent/path/xyz")).is_err());
    }

    #[test]
    fn open_inconsistent_dims_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("000000.png"), &PixelFrame::filled(8, 8, [1, 2, 3]));
        write_png(&dir.path().join("000001.png"), &PixelFrame::filled(9, 8, [1, 2, 3]));
        match open_video(dir.path()) {
            Err(Error::InconsistentFrames { .. }) => {}
            other => panic!("expected InconsistentFrames, got {other:?}"),
        }
    }

    /// 33_177_600 bytes at 640x480 RGB24 is exactly 36 frames.
    #[test]
    fn raw_stream_frame_count_from_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("v.rgb24");
        let frame_bytes = 640 * 480 * 3;
        let file = File::create(&raw).unwrap();
        file.set_len(36 * frame_bytes as u64).unwrap();
        drop(file);
        assert_eq!(36 * frame_bytes, 33_177_600);
        std::fs::write(
            dir.path().join("v.meta.json"),
            r#"{"width":640,"height":480,"frames":36}"#,
        )
        .unwrap();
        let src = open_video(&raw).unwrap();
        assert_eq!(src.frame_count, 36);
        assert_eq!(src.frame_size, (640, 480));
        assert_eq!(src.id, "v");
    }

    #[test]
    fn raw_stream_sidecar_payload_mismatch_errors() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("v.rgb24");
        std::fs::write(&raw, vec![0u8; 12 * 2]).unwrap();
        std::fs::write(
            dir.path().join("v.meta.json"),
            r#"{"width":2,"height":2,"frames":3}"#,
        )
        .unwrap();
        assert!(open_video(&raw).is_err());
    }

    /// Frame 1 of a 2x2 raw stream lives at payload bytes 12..24.
    #[test]
    fn raw_stream_read_frame_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("v.rgb24");
        let payload: Vec<u8> = (0..36).collect();
        std::fs::write(&raw, &payload).unwrap();
        std::fs::write(
            dir.path().join("v.meta.json"),
            r#"{"width":2,"height":2,"frames":3}"#,
        )
        .unwrap();
        let src = open_video(&raw).unwrap();
        let f1 = read_frame(&src, 1).unwrap();
        assert_eq!(f1.data, payload[12..24].to_vec());
    }

    #[test]
    fn read_frame_is_pure_and_bounded() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            write_png(
                &dir.path().join(format!("{i:06}.png")),
                &PixelFrame::filled(4, 4, [i as u8, 100, 200]),
            );
        }
        let src = open_video(dir.path()).unwrap();
        let a = read_frame(&src, 0).unwrap();
        let b = read_frame(&src, 0).unwrap();
        assert_eq!(a, b);
        match read_frame(&src, 3) {
            Err(Error::FrameOutOfRange { .. }) => {}
            other => panic!("expected FrameOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn grayscale_white_black_red() {
        let white = to_grayscale(&PixelFrame::filled(3, 2, [255, 255, 255]));
        assert!(white.data.iter().all(|&v| (v - 1.0).abs() < 1e-6));

        let black = to_grayscale(&PixelFrame::filled(3, 2, [0, 0, 0]));
        assert!(black.data.iter().all(|&v| v == 0.0));

        let red = to_grayscale(&PixelFrame::filled(3, 2, [255, 0, 0]));
        assert!(red.data.iter().all(|&v| (v - 0.299).abs() < 1e-6));
    }

    #[test]
    fn resize_identity_is_exact() {
        let frame = GrayFrame::new(5, 4, (0..20).map(|i| i as f32 / 19.0).collect()).unwrap();
        let out = resize_bilinear_gray(&frame, 5, 4).unwrap();
        for (a, b) in frame.data.iter().zip(&out.data) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    /// Hand-evaluated half-pixel-center weights for a 2x1 -> 4x1 upsample.
    #[test]
    fn resize_2x1_to_4x1_hand_weights() {
        let frame = GrayFrame::new(2, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear_gray(&frame, 4, 1).unwrap();
        let expected = [0.0, 0.25, 0.75, 1.0];
        for (got, want) in out.data.iter().zip(expected) {
            assert!((got - want).abs() < 1e-6, "{:?}", out.data);
        }
    }

    #[test]
    fn resize_zero_dim_rejected() {
        let frame = GrayFrame::zeros(4, 4);
        assert!(resize_bilinear_gray(&frame, 0, 4).is_err());
        assert!(resize_bilinear_gray(&frame, 4, 0).is_err());
    }

    proptest! {
        /// Resizing a constant frame yields that constant; any resize stays
        /// inside the input's [min, max].
        #[test]
        fn resize_constant_and_bounds(
            v in 0.0f32..1.0,
            w in 1usize..32,
            h in 1usize..32,
            ow in 1usize..48,
            oh in 1usize..48,
        ) {
            let frame = GrayFrame::new(w, h, vec![v; w * h]).unwrap();
            let out = resize_bilinear_gray(&frame, ow, oh).unwrap();
            for &o in &out.data {
                prop_assert!((o - v).abs() < 1e-6);
            }
        }

        #[test]
        fn resize_respects_min_max(
            data in proptest::collection::vec(0.0f32..1.0, 16),
            ow in 1usize..20,
            oh in 1usize..20,
        ) {
            let frame = GrayFrame::new(4, 4, data.clone()).unwrap();
            let lo = data.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = data.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let out = resize_bilinear_gray(&frame, ow, oh).unwrap();
            for &o in &out.data {
                prop_assert!(o >= lo - 1e-6 && o <= hi + 1e-6);
            }
        }

        /// Grayscale is a pointwise map: permuting pixels commutes with it.
        #[test]
        fn grayscale_is_pointwise(data in proptest::collection::vec(0u8..=255, 27)) {
            let frame = PixelFrame::new(3, 3, data.clone()).unwrap();
            let gray = to_grayscale(&frame);
            // Reverse the pixel order and compare against reversed output.
            let mut rev: Vec<u8> = Vec::new();
            for px in data.chunks_exact(3).rev() {
                rev.extend_from_slice(px);
            }
            let gray_rev = to_grayscale(&PixelFrame::new(3, 3, rev).unwrap());
            let mut expect: Vec<f32> = gray.data.clone();
            expect.reverse();
            prop_assert_eq!(gray_rev.data, expect);
        }
    }
}
