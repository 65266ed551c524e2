//! Synthetic fixtures: smoothed noise textures for flow tests and
//! moving-dot videos with motion-correlated targets. The real recordings are
//! restricted, so examples and tests run on these.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::media::{GrayFrame, PixelFrame};

/// Seeded uniform noise blurred with a Gaussian and min-max normalized to
/// [0, 1]. Smooth enough for polynomial expansion to track.
pub fn smoothed_noise(width: usize, height: usize, sigma: f64, seed: u64) -> GrayFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f32> = (0..width * height).map(|_| rng.random::<f32>()).collect();
    let frame = GrayFrame {
        width,
        height,
        data,
    };
    let blurred = crate::flow::gaussian_blur(&frame, sigma);
    let lo = blurred.data.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = blurred.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let range = (hi - lo).max(1e-9);
    GrayFrame {
        width,
        height,
        data: blurred.data.iter().map(|v| (v - lo) / range).collect(),
    }
}

/// Integer wraparound shift: content moves by (+dx, +dy).
pub fn shift_wrap(frame: &GrayFrame, dx: i32, dy: i32) -> GrayFrame {
    let w = frame.width as i32;
    let h = frame.height as i32;
    let mut data = vec![0f32; frame.data.len()];
    for y in 0..h {
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w);
            let sy = (y - dy).rem_euclid(h);
            data[(y * w + x) as usize] = frame.data[(sy * w + sx) as usize];
        }
    }
    GrayFrame {
        width: frame.width,
        height: frame.height,
        data,
    }
}

/// One synthetic video: Gaussian dots drifting at a shared velocity over a
/// faint static texture, wrapping at the borders.
#[derive(Debug, Clone)]
pub struct MovingDots {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub n_dots: usize,
    /// Pixels per frame.
    pub speed: f64,
    /// Direction in radians.
    pub direction: f64,
    pub seed: u64,
}

impl MovingDots {
    pub fn frame(&self, t: usize) -> PixelFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dots: Vec<(f64, f64)> = (0..self.n_dots)
            .map(|_| {
                (
                    rng.random::<f64>() * self.width as f64,
                    rng.random::<f64>() * self.height as f64,
                )
            })
            .collect();

        // static background texture in [0, 0.25]
        let bg = smoothed_noise(self.width, self.height, 3.0, self.seed ^ 0xBACC);
        let mut luma: Vec<f64> = bg.data.iter().map(|v| 0.25 * *v as f64).collect();

        let vx = self.speed * self.direction.cos();
        let vy = self.speed * self.direction.sin();
        let sigma = 4.0f64;
        let radius = (3.0 * sigma).ceil() as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        for &(x0, y0) in &dots {
            let cx = (x0 + vx * t as f64).rem_euclid(self.width as f64);
            let cy = (y0 + vy * t as f64).rem_euclid(self.height as f64);
            // render with wrap copies so dots crossing borders stay coherent
            for wy in [-(h as i64), 0, h as i64] {
                for wx in [-(w as i64), 0, w as i64] {
                    let dxc = cx + wx as f64;
                    let dyc = cy + wy as f64;
                    if dxc < -(radius as f64)
                        || dxc > (w + radius) as f64
                        || dyc < -(radius as f64)
                        || dyc > (h + radius) as f64
                    {
                        continue;
                    }
                    let x_lo = ((dxc - radius as f64).floor() as i64).max(0);
                    let x_hi = ((dxc + radius as f64).ceil() as i64).min(w - 1);
                    let y_lo = ((dyc - radius as f64).floor() as i64).max(0);
                    let y_hi = ((dyc + radius as f64).ceil() as i64).min(h - 1);
                    for y in y_lo..=y_hi {
                        for x in x_lo..=x_hi {
                            let d2 = (x as f64 - dxc).powi(2) + (y as f64 - dyc).powi(2);
                            luma[(y * w + x) as usize] +=
                                0.75 * (-d2 / (2.0 * sigma * sigma)).exp();
                        }
                    }
                }
            }
        }

        let mut data = Vec::with_capacity(self.width * self.height * 3);
        for v in luma {
            let v = v.clamp(0.0, 1.0);
            // slight tint keeps the RGB channels distinguishable
            data.push((v * 255.0).round() as u8);
            data.push((v * 0.9 * 255.0).round() as u8);
            data.push((v * 0.8 * 255.0).round() as u8);
        }
        PixelFrame {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Writes the video as a `%06d.png` frame directory under `root`.
    pub fn write_dir(&self, root: &Path) -> Result<PathBuf> {
        let dir = root.join(&self.id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for t in 0..self.frames {
            let frame = self.frame(t);
            let img = image::RgbImage::from_raw(
                frame.width as u32,
                frame.height as u32,
                frame.data,
            )
            .expect("frame buffer");
            let path = dir.join(format!("{t:06}.png"));
            img.save(&path).map_err(|e| Error::Image {
                path: path.clone(),
                source: e,
            })?;
        }
        Ok(dir)
    }
}

/// A generated corpus on disk: videos plus labels and folds CSVs.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub videos_dir: PathBuf,
    pub labels_path: PathBuf,
    pub folds_path: PathBuf,
    pub video_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub n_videos: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_videos: 8,
            frames: 13,
            width: 256,
            height: 256,
            seed: 7,
        }
    }
}

/// Generates moving-dot videos whose labels are functions of the dot speed:
/// faster dots mean more progressive motility and more head defects.
pub fn generate_fixture(root: &Path, spec: &FixtureSpec) -> Result<Fixture> {
    let videos_dir = root.join("videos");
    std::fs::create_dir_all(&videos_dir).map_err(|e| Error::io(&videos_dir, e))?;

    let mut labels = String::from(
        "video_id,progressive,non_progressive,immotile,head_defects,tail_defects,midpiece_neck_defects\n",
    );
    let mut folds = String::from("video_id,fold\n");
    let mut ids = Vec::new();

    for i in 0..spec.n_videos {
        let id = format!("p{i:02}");
        let frac = if spec.n_videos > 1 {
            i as f64 / (spec.n_videos - 1) as f64
        } else {
            0.0
        };
        let speed = 0.4 + 1.1 * frac;
        let video = MovingDots {
            id: id.clone(),
            width: spec.width,
            height: spec.height,
            frames: spec.frames,
            n_dots: 3 + i,
            speed,
            direction: i as f64 * std::f64::consts::FRAC_PI_4,
            seed: spec.seed.wrapping_add(i as u64 * 1009),
        };
        video.write_dir(&videos_dir)?;

        let progressive = 5.0 + 90.0 * frac;
        let non_progressive = 0.7 * (100.0 - progressive);
        let immotile = 100.0 - progressive - non_progressive;
        let head = 10.0 + 60.0 * frac;
        let tail = 40.0 - 25.0 * frac;
        let mid = 15.0 + 10.0 * frac;
        labels.push_str(&format!(
            "{id},{progressive:.3},{non_progressive:.3},{immotile:.3},{head:.3},{tail:.3},{mid:.3}\n"
        ));
        folds.push_str(&format!("{id},{}\n", i % 3));
        ids.push(id);
    }

    let labels_path = root.join("labels.csv");
    std::fs::write(&labels_path, labels).map_err(|e| Error::io(&labels_path, e))?;
    let folds_path = root.join("folds.csv");
    std::fs::write(&folds_path, folds).map_err(|e| Error::io(&folds_path, e))?;

    Ok(Fixture {
        videos_dir,
        labels_path,
        folds_path,
        video_ids: ids,
    })
}
