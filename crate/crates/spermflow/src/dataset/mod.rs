//! Dataset construction: labels, chunk sampling, D1/D2 sample tensors, and
//! participant-level fold assignment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_to_rgb, FarnebackParams};
use crate::media::{
    read_frame, resize_bilinear_gray, resize_bilinear_rgb, to_grayscale, VideoSource,
};

mod io;

pub use io::{
    manifest_path_for, read_dataset, write_dataset, DatasetManifest, DatasetReader, DatasetWriter,
};

/// Channels per sample; both dataset kinds stack nine.
pub const SAMPLE_CHANNELS: usize = 9;
/// Network input resolution.
pub const SAMPLE_SIZE: usize = 256;
/// Frames per chunk: D1 needs frames 0..9, D2 needs frames 0, 1 and 10.
pub const CHUNK_LEN: usize = 11;
/// Chunks sampled per video.
pub const DEFAULT_CHUNKS_PER_VIDEO: usize = 250;

pub const LABELS_HEADER: &str =
    "video_id,progressive,non_progressive,immotile,head_defects,tail_defects,midpiece_neck_defects";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Motility,
    Morphology,
}

impl Task {
    pub fn code(self) -> u8 {
        match self {
            Task::Motility => 0,
            Task::Morphology => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Task::Motility),
            1 => Ok(Task::Morphology),
            other => Err(Error::InvalidParameter(format!("task code {other}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Motility => "motility",
            Task::Morphology => "morphology",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "motility" => Ok(Task::Motility),
            "morphology" => Ok(Task::Morphology),
            other => Err(Error::InvalidParameter(format!("unknown task {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    D1,
    D2,
}

impl DatasetKind {
    pub fn code(self) -> u8 {
        match self {
            DatasetKind::D1 => 1,
            DatasetKind::D2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(DatasetKind::D1),
            2 => Ok(DatasetKind::D2),
            other => Err(Error::InvalidParameter(format!("dataset kind {other}"))),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetKind::D1 => "D1",
            DatasetKind::D2 => "D2",
        })
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1" => Ok(DatasetKind::D1),
            "d2" => Ok(DatasetKind::D2),
            other => Err(Error::InvalidParameter(format!("unknown kind {other}"))),
        }
    }
}

/// Ground-truth percentages for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub video_id: String,
    /// (progressive, non_progressive, immotile), sums to 100 +/- 1.
    pub motility: [f64; 3],
    /// (head, tail, midpiece/neck defects).
    pub morphology: [f64; 3],
}

impl LabelRecord {
    pub fn target(&self, task: Task) -> [f32; 3] {
        let src = match task {
            Task::Motility => &self.motility,
            Task::Morphology => &self.morphology,
        };
        [src[0] as f32, src[1] as f32, src[2] as f32]
    }

    fn validate(&self) -> std::result::Result<(), String> {
        for v in self.motility.iter().chain(&self.morphology) {
            if !v.is_finite() || !(0.0..=100.0).contains(v) {
                return Err(format!("value {v} outside [0, 100]"));
            }
        }
        let sum: f64 = self.motility.iter().sum();
        if (sum - 100.0).abs() > 1.0 {
            return Err(format!("motility sums to {sum}, expected 100 +/- 1"));
        }
        Ok(())
    }
}

/// Loads and validates the labels CSV (header [`LABELS_HEADER`]).
pub fn load_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;

    let expected: Vec<&str> = LABELS_HEADER.split(',').collect();
    let headers = reader.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::BadLabel {
            path: path.to_path_buf(),
            row: 0,
            reason: format!("unexpected header {got:?}"),
        });
    }

    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let bad = |reason: String| Error::BadLabel {
            path: path.to_path_buf(),
            row: row_no,
            reason,
        };
        let record = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        if record.len() != 7 {
            return Err(bad(format!("{} fields, expected 7", record.len())));
        }
        let mut nums = [0f64; 6];
        for (j, n) in nums.iter_mut().enumerate() {
            *n = record[j + 1]
                .parse()
                .map_err(|_| bad(format!("bad number {:?}", &record[j + 1])))?;
        }
        let label = LabelRecord {
            video_id: record[0].to_string(),
            motility: [nums[0], nums[1], nums[2]],
            morphology: [nums[3], nums[4], nums[5]],
        };
        label.validate().map_err(bad)?;
        out.push(label);
    }
    Ok(out)
}

/// One sample's frame window within a video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpec {
    pub video_id: String,
    pub start_frame: usize,
    pub length: usize,
}

/// `n_chunks` start positions uniformly spaced over
/// `[0, frame_count - chunk_len]`, rounded to nearest, sorted ascending.
/// Duplicates are expected for short videos.
pub fn sample_chunk_positions(
    frame_count: usize,
    n_chunks: usize,
    chunk_len: usize,
) -> Result<Vec<usize>> {
    if n_chunks == 0 {
        return Err(Error::InvalidParameter("n_chunks must be >= 1".into()));
    }
    if frame_count < chunk_len {
        return Err(Error::VideoTooShort(String::new(), frame_count, chunk_len));
    }
    let span = (frame_count - chunk_len) as f64;
    if n_chunks == 1 {
        return Ok(vec![0]);
    }
    Ok((0..n_chunks)
        .map(|i| (i as f64 * span / (n_chunks - 1) as f64).round() as usize)
        .collect())
}

/// Seeded random alternative to the uniform rule; sorted ascending.
pub fn sample_chunk_positions_random(
    frame_count: usize,
    n_chunks: usize,
    chunk_len: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    use rand::{Rng, SeedableRng};
    if n_chunks == 0 {
        return Err(Error::InvalidParameter("n_chunks must be >= 1".into()));
    }
    if frame_count < chunk_len {
        return Err(Error::VideoTooShort(String::new(), frame_count, chunk_len));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let hi = frame_count - chunk_len;
    let mut starts: Vec<usize> = (0..n_chunks).map(|_| rng.random_range(0..=hi)).collect();
    starts.sort_unstable();
    Ok(starts)
}

/// One training sample: a 9x256x256 tensor, its 3-value target, and enough
/// identity to aggregate predictions per video.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTensor {
    pub video_id: String,
    pub start_frame: u32,
    pub kind: DatasetKind,
    pub task: Task,
    pub target: [f32; 3],
    /// Row-major (channel, y, x), values in [0, 1].
    pub data: Vec<f32>,
}

impl SampleTensor {
    pub const LEN: usize = SAMPLE_CHANNELS * SAMPLE_SIZE * SAMPLE_SIZE;

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != Self::LEN {
            return Err(Error::shape(
                "sample",
                format!("tensor length {} != {}", self.data.len(), Self::LEN),
            ));
        }
        if !self.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::NumericalFailure(format!(
                "sample {}@{} has values outside [0, 1]",
                self.video_id, self.start_frame
            )));
        }
        if !self
            .target
            .iter()
            .all(|v| v.is_finite() && (0.0..=100.0).contains(v))
        {
            return Err(Error::InvalidParameter(format!(
                "target {:?} outside [0, 100]",
                self.target
            )));
        }
        Ok(())
    }
}

fn check_chunk(src: &VideoSource, chunk: &ChunkSpec) -> Result<()> {
    if chunk.start_frame + chunk.length > src.frame_count {
        return Err(Error::FrameOutOfRange {
            index: chunk.start_frame + chunk.length - 1,
            count: src.frame_count,
        });
    }
    Ok(())
}

fn gray_256(src: &VideoSource, index: usize) -> Result<crate::media::GrayFrame> {
    let frame = read_frame(src, index)?;
    let gray = to_grayscale(&frame);
    resize_bilinear_gray(&gray, SAMPLE_SIZE, SAMPLE_SIZE)
}

/// D1: channels 0..9 are grayscale 256x256 frames `start .. start+9`.
pub fn build_d1_sample(
    src: &VideoSource,
    chunk: &ChunkSpec,
    target: [f32; 3],
    task: Task,
) -> Result<SampleTensor> {
    check_chunk(src, chunk)?;
    let plane = SAMPLE_SIZE * SAMPLE_SIZE;
    let mut data = vec![0f32; SampleTensor::LEN];
    for c in 0..SAMPLE_CHANNELS {
        let gray = gray_256(src, chunk.start_frame + c)?;
        data[c * plane..(c + 1) * plane].copy_from_slice(&gray.data);
    }
    let sample = SampleTensor {
        video_id: chunk.video_id.clone(),
        start_frame: chunk.start_frame as u32,
        kind: DatasetKind::D1,
        task,
        target,
        data,
    };
    sample.validate()?;
    Ok(sample)
}

/// D2: channels 0-2 are the RGB first frame, 3-5 the stride-1 flow image,
/// 6-8 the stride-10 flow image (frames `start` vs `start+10`), all scaled
/// to [0, 1]. Flow runs at 256x256, after the resize.
pub fn build_d2_sample(
    src: &VideoSource,
    chunk: &ChunkSpec,
    params: &FarnebackParams,
    target: [f32; 3],
    task: Task,
) -> Result<SampleTensor> {
    check_chunk(src, chunk)?;
    if chunk.length < CHUNK_LEN {
        return Err(Error::VideoTooShort(
            chunk.video_id.clone(),
            chunk.length,
            CHUNK_LEN,
        ));
    }
    let plane = SAMPLE_SIZE * SAMPLE_SIZE;
    let mut data = vec![0f32; SampleTensor::LEN];

    let rgb = resize_bilinear_rgb(&read_frame(src, chunk.start_frame)?, SAMPLE_SIZE, SAMPLE_SIZE)?;
    for (i, px) in rgb.data.chunks_exact(3).enumerate() {
        data[i] = px[0] as f32 / 255.0;
        data[plane + i] = px[1] as f32 / 255.0;
        data[2 * plane + i] = px[2] as f32 / 255.0;
    }

    let g0 = gray_256(src, chunk.start_frame)?;
    for (offset, stride) in [(3usize, 1usize), (6, 10)] {
        let gn = gray_256(src, chunk.start_frame + stride)?;
        let flow = estimate_flow(&g0, &gn, params, None)?;
        let img = flow_to_rgb(&flow);
        for (i, px) in img.data.chunks_exact(3).enumerate() {
            data[offset * plane + i] = px[0] as f32 / 255.0;
            data[(offset + 1) * plane + i] = px[1] as f32 / 255.0;
            data[(offset + 2) * plane + i] = px[2] as f32 / 255.0;
        }
    }

    let sample = SampleTensor {
        video_id: chunk.video_id.clone(),
        start_frame: chunk.start_frame as u32,
        kind: DatasetKind::D2,
        task,
        target,
        data,
    };
    sample.validate()?;
    Ok(sample)
}

/// Builds every chunk of one video in parallel; output order follows the
/// (sorted) start positions regardless of worker scheduling.
pub fn build_video_samples(
    src: &VideoSource,
    label: &LabelRecord,
    task: Task,
    kind: DatasetKind,
    params: &FarnebackParams,
    starts: &[usize],
) -> Result<Vec<SampleTensor>> {
    use rayon::prelude::*;
    let target = label.target(task);
    starts
        .par_iter()
        .map(|&start| {
            let chunk = ChunkSpec {
                video_id: label.video_id.clone(),
                start_frame: start,
                length: CHUNK_LEN,
            };
            match kind {
                DatasetKind::D1 => build_d1_sample(src, &chunk, target, task),
                DatasetKind::D2 => build_d2_sample(src, &chunk, params, target, task),
            }
        })
        .collect()
}

/// Maps every video to a fold in {0, 1, 2}; videos of one participant share
/// a fold.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FoldAssignment {
    map: BTreeMap<String, u8>,
}

impl FoldAssignment {
    pub fn fold_of(&self, video_id: &str) -> Option<u8> {
        self.map.get(video_id).copied()
    }

    pub fn videos_in_fold(&self, fold: u8) -> Vec<&str> {
        self.map
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u8)> {
        self.map.iter().map(|(id, &f)| (id.as_str(), f))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Participant key: the video id up to the first underscore.
fn participant_of(video_id: &str) -> &str {
    video_id.split('_').next().unwrap_or(video_id)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Builds the fold assignment for the given video ids, either from a
/// `video_id,fold` CSV or, absent one, by a stable participant-id hash
/// modulo 3.
pub fn assign_folds_for_ids<'a, I>(ids: I, fold_file: Option<&Path>) -> Result<FoldAssignment>
where
    I: IntoIterator<Item = &'a str>,
{
    let ids: Vec<&str> = ids.into_iter().collect();
    let mut map = BTreeMap::new();
    match fold_file {
        Some(path) => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_path(path)
                .map_err(|e| Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })?;
            let mut from_file: BTreeMap<String, u8> = BTreeMap::new();
            for row in reader.records() {
                let record = row.map_err(|e| Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })?;
                if record.len() != 2 {
                    return Err(Error::BadFold {
                        path: path.to_path_buf(),
                        reason: format!("row {record:?} has {} fields", record.len()),
                    });
                }
                let fold: u8 = record[1].parse().map_err(|_| Error::BadFold {
                    path: path.to_path_buf(),
                    reason: format!("bad fold {:?}", &record[1]),
                })?;
                if fold > 2 {
                    return Err(Error::BadFold {
                        path: path.to_path_buf(),
                        reason: format!("fold {fold} outside 0..=2"),
                    });
                }
                from_file.insert(record[0].to_string(), fold);
            }
            for id in &ids {
                match from_file.get(*id) {
                    Some(&fold) => {
                        map.insert(id.to_string(), fold);
                    }
                    None => {
                        return Err(Error::BadFold {
                            path: path.to_path_buf(),
                            reason: format!("video {id} missing from fold file"),
                        });
                    }
                }
            }
            // one fold per participant
            let mut per_participant: BTreeMap<&str, u8> = BTreeMap::new();
            for (id, &fold) in map.iter().map(|(id, f)| (id.as_str(), f)) {
                let p = participant_of(id);
                if let Some(&prev) = per_participant.get(p) {
                    if prev != fold {
                        return Err(Error::BadFold {
                            path: path.to_path_buf(),
                            reason: format!("participant {p} split across folds {prev} and {fold}"),
                        });
                    }
                } else {
                    per_participant.insert(p, fold);
                }
            }
        }
        None => {
            for id in &ids {
                let fold = (fnv1a(participant_of(id).as_bytes()) % 3) as u8;
                map.insert(id.to_string(), fold);
            }
        }
    }
    Ok(FoldAssignment { map })
}

/// [`assign_folds_for_ids`] over the labeled videos.
pub fn assign_folds(labels: &[LabelRecord], fold_file: Option<&Path>) -> Result<FoldAssignment> {
    assign_folds_for_ids(labels.iter().map(|l| l.video_id.as_str()), fold_file)
}
