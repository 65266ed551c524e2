//! Binary dataset files ("SPRM"): a fixed header carrying the dataset kind
//! and flow parameters, then length-prefixed samples. Everything is
//! little-endian and round-trips bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FarnebackParams;

use super::{DatasetKind, SampleTensor, Task, CHUNK_LEN, SAMPLE_CHANNELS, SAMPLE_SIZE};

const MAGIC: &[u8; 4] = b"SPRM";
const VERSION: u16 = 1;

/// Sidecar summary of a written dataset, also returned by the writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_kind: DatasetKind,
    pub flow_params: FarnebackParams,
    pub sample_count: u64,
    pub per_video_chunks: BTreeMap<String, u64>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub chunk_len: usize,
}

pub struct DatasetWriter {
    path: PathBuf,
    file: BufWriter<std::fs::File>,
    kind: DatasetKind,
    flow_params: FarnebackParams,
    count: u64,
    per_video: BTreeMap<String, u64>,
    finished: bool,
}

impl DatasetWriter {
    pub fn create(path: &Path, kind: DatasetKind, flow_params: &FarnebackParams) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io_err = |e: std::io::Error| Error::io(path, e);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_u16::<LittleEndian>(VERSION).map_err(io_err)?;
        w.write_u8(kind.code()).map_err(io_err)?;
        w.write_f32::<LittleEndian>(flow_params.pyr_scale as f32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(flow_params.levels as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(flow_params.winsize as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(flow_params.iterations as u32).map_err(io_err)?;
        w.write_u32::<LittleEndian>(flow_params.poly_n as u32).map_err(io_err)?;
        w.write_f32::<LittleEndian>(flow_params.poly_sigma as f32).map_err(io_err)?;
        // sample count, patched on finish
        w.write_u32::<LittleEndian>(0).map_err(io_err)?;
        Ok(Self {
            path: path.to_path_buf(),
            file: w,
            kind,
            flow_params: flow_params.clone(),
            count: 0,
            per_video: BTreeMap::new(),
            finished: false,
        })
    }

    pub fn write_sample(&mut self, sample: &SampleTensor) -> Result<()> {
        if sample.kind != self.kind {
            return Err(Error::BadDataset {
                path: self.path.clone(),
                reason: format!("sample kind {} != dataset kind {}", sample.kind, self.kind),
            });
        }
        sample.validate()?;
        let io_err = |e: std::io::Error| Error::io(&self.path, e);
        let id = sample.video_id.as_bytes();
        self.file.write_u32::<LittleEndian>(id.len() as u32).map_err(io_err)?;
        self.file.write_all(id).map_err(io_err)?;
        self.file.write_u32::<LittleEndian>(sample.start_frame).map_err(io_err)?;
        self.file.write_u8(sample.task.code()).map_err(io_err)?;
        for &t in &sample.target {
            self.file.write_f32::<LittleEndian>(t).map_err(io_err)?;
        }
        for &v in &sample.data {
            self.file.write_f32::<LittleEndian>(v).map_err(io_err)?;
        }
        self.count += 1;
        *self.per_video.entry(sample.video_id.clone()).or_insert(0) += 1;
        Ok(())
    }

    /// Patches the header count and writes the `.manifest.json` sidecar.
    pub fn finish(mut self) -> Result<DatasetManifest> {
        let io_err = |e: std::io::Error| Error::io(&self.path, e);
        self.file.flush().map_err(io_err)?;
        let mut file = self.file.into_inner().map_err(|e| {
            Error::io(
                &self.path,
                std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
            )
        })?;
        // count lives after magic(4) + version(2) + kind(1) + flow block(24)
        file.seek(SeekFrom::Start(31)).map_err(io_err)?;
        let mut buf = [0u8; 4];
        buf.copy_from_slice(&(self.count as u32).to_le_bytes());
        file.write_all(&buf).map_err(io_err)?;
        file.flush().map_err(io_err)?;
        self.finished = true;

        let manifest = DatasetManifest {
            dataset_kind: self.kind,
            flow_params: self.flow_params.clone(),
            sample_count: self.count,
            per_video_chunks: self.per_video.clone(),
            channels: SAMPLE_CHANNELS,
            height: SAMPLE_SIZE,
            width: SAMPLE_SIZE,
            chunk_len: CHUNK_LEN,
        };
        let manifest_path = manifest_path_for(&self.path);
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest)
    }
}

pub fn manifest_path_for(dataset_path: &Path) -> PathBuf {
    let mut os = dataset_path.as_os_str().to_os_string();
    os.push(".manifest.json");
    PathBuf::from(os)
}

pub struct DatasetReader {
    path: PathBuf,
    file: BufReader<std::fs::File>,
    pub kind: DatasetKind,
    pub flow_params: FarnebackParams,
    pub sample_count: u64,
    remaining: u64,
}

impl DatasetReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |reason: &str| Error::BadDataset {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let io_err = |e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::BadDataset {
                    path: path.to_path_buf(),
                    reason: "truncated file".into(),
                }
            } else {
                Error::io(path, e)
            }
        };

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u16::<LittleEndian>().map_err(io_err)?;
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let kind = DatasetKind::from_code(r.read_u8().map_err(io_err)?)?;
        let flow_params = FarnebackParams {
            pyr_scale: r.read_f32::<LittleEndian>().map_err(io_err)? as f64,
            levels: r.read_u32::<LittleEndian>().map_err(io_err)? as usize,
            winsize: r.read_u32::<LittleEndian>().map_err(io_err)? as usize,
            iterations: r.read_u32::<LittleEndian>().map_err(io_err)? as usize,
            poly_n: r.read_u32::<LittleEndian>().map_err(io_err)? as usize,
            poly_sigma: r.read_f32::<LittleEndian>().map_err(io_err)? as f64,
        };
        let sample_count = r.read_u32::<LittleEndian>().map_err(io_err)? as u64;
        Ok(Self {
            path: path.to_path_buf(),
            file: r,
            kind,
            flow_params,
            sample_count,
            remaining: sample_count,
        })
    }

    /// Reads the next sample, or `None` once the advertised count is done.
    pub fn next_sample(&mut self) -> Result<Option<SampleTensor>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let io_err = |path: &Path, e: std::io::Error| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::BadDataset {
                    path: path.to_path_buf(),
                    reason: "truncated file".into(),
                }
            } else {
                Error::io(path, e)
            }
        };
        let path = self.path.clone();
        let r = &mut self.file;
        let id_len = r.read_u32::<LittleEndian>().map_err(|e| io_err(&path, e))? as usize;
        if id_len > 4096 {
            return Err(Error::BadDataset {
                path,
                reason: format!("implausible video id length {id_len}"),
            });
        }
        let mut id = vec![0u8; id_len];
        r.read_exact(&mut id).map_err(|e| io_err(&path, e))?;
        let video_id = String::from_utf8(id).map_err(|_| Error::BadDataset {
            path: path.clone(),
            reason: "non-UTF-8 video id".into(),
        })?;
        let start_frame = r.read_u32::<LittleEndian>().map_err(|e| io_err(&path, e))?;
        let task = Task::from_code(r.read_u8().map_err(|e| io_err(&path, e))?)?;
        let mut target = [0f32; 3];
        for t in &mut target {
            *t = r.read_f32::<LittleEndian>().map_err(|e| io_err(&path, e))?;
        }
        let mut data = vec![0f32; SampleTensor::LEN];
        {
            // bulk read as bytes, then decode
            let mut bytes = vec![0u8; SampleTensor::LEN * 4];
            r.read_exact(&mut bytes).map_err(|e| io_err(&path, e))?;
            for (v, chunk) in data.iter_mut().zip(bytes.chunks_exact(4)) {
                *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
            }
        }
        self.remaining -= 1;
        Ok(Some(SampleTensor {
            video_id,
            start_frame,
            kind: self.kind,
            task,
            target,
            data,
        }))
    }

    pub fn read_all(mut self) -> Result<Vec<SampleTensor>> {
        let mut out = Vec::with_capacity(self.sample_count as usize);
        while let Some(sample) = self.next_sample()? {
            out.push(sample);
        }
        Ok(out)
    }
}

/// Writes `samples` (one consistent kind) and returns the manifest.
pub fn write_dataset(
    samples: &[SampleTensor],
    path: &Path,
    kind: DatasetKind,
    flow_params: &FarnebackParams,
) -> Result<DatasetManifest> {
    let mut writer = DatasetWriter::create(path, kind, flow_params)?;
    for s in samples {
        writer.write_sample(s)?;
    }
    writer.finish()
}

/// Reads the whole dataset into memory.
pub fn read_dataset(path: &Path) -> Result<(Vec<SampleTensor>, DatasetKind, FarnebackParams)> {
    let reader = DatasetReader::open(path)?;
    let kind = reader.kind;
    let params = reader.flow_params.clone();
    let samples = reader.read_all()?;
    Ok((samples, kind, params))
}
