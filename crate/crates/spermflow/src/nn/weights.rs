//! Named-tensor weight files ("SPWT"): magic, version u16, entry count u32,
//! then per entry a length-prefixed UTF-8 name, rank u8, u32 dims, and an
//! f32 little-endian payload.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::model::Model;
use super::scalar::Scalar;

const MAGIC: &[u8; 4] = b"SPWT";
const VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct WeightEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

/// Serializes every parameter and batch-norm buffer under its visit name.
pub fn export_weights<T: Scalar>(model: &mut Model<T>, path: &Path) -> Result<()> {
    let mut entries: Vec<WeightEntry> = Vec::new();
    model.visit_params(&mut |name, t| {
        entries.push(WeightEntry {
            name: name.to_string(),
            dims: t.shape().to_vec(),
            values: t.data().iter().map(|v| v.as_f64() as f32).collect(),
        });
    });
    model.visit_buffers(&mut |name, b| {
        entries.push(WeightEntry {
            name: name.to_string(),
            dims: vec![b.len()],
            values: b.iter().map(|v| v.as_f64() as f32).collect(),
        });
    });

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| Error::io(path, e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_u16::<LittleEndian>(VERSION).map_err(io_err)?;
    w.write_u32::<LittleEndian>(entries.len() as u32).map_err(io_err)?;
    for e in &entries {
        let bytes = e.name.as_bytes();
        w.write_u32::<LittleEndian>(bytes.len() as u32).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
        w.write_u8(e.dims.len() as u8).map_err(io_err)?;
        for &d in &e.dims {
            w.write_u32::<LittleEndian>(d as u32).map_err(io_err)?;
        }
        for &v in &e.values {
            w.write_f32::<LittleEndian>(v).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_weight_entries(path: &Path) -> Result<Vec<WeightEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |reason: String| Error::BadWeights {
        path: path.to_path_buf(),
        reason,
    };
    let io_err = |e: std::io::Error| Error::io(path, e);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = r.read_u16::<LittleEndian>().map_err(io_err)?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>().map_err(io_err)?;
    let mut entries = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let name_len = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        if name_len > 4096 {
            return Err(bad(format!("implausible name length {name_len}")));
        }
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name).map_err(io_err)?;
        let name = String::from_utf8(name).map_err(|_| bad("non-UTF-8 name".into()))?;
        let rank = r.read_u8().map_err(io_err)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.read_u32::<LittleEndian>().map_err(io_err)? as usize);
        }
        let numel: usize = dims.iter().product();
        let mut values = Vec::with_capacity(numel);
        for _ in 0..numel {
            values.push(r.read_f32::<LittleEndian>().map_err(io_err)?);
        }
        entries.push(WeightEntry { name, dims, values });
    }
    Ok(entries)
}

/// Loads weights by name into the model.
///
/// The first convolution may be adapted when the file carries fewer input
/// channels than the model expects and the counts divide evenly: kernels are
/// tiled across the channel axis and rescaled by `file/model` so that inputs
/// with repeated channel groups reproduce the original activations.
pub fn import_weights<T: Scalar>(model: &mut Model<T>, path: &Path) -> Result<()> {
    let entries = read_weight_entries(path)?;
    let mut by_name: BTreeMap<String, WeightEntry> = entries
        .into_iter()
        .map(|e| (e.name.clone(), e))
        .collect();
    let bad = |reason: String| Error::BadWeights {
        path: path.to_path_buf(),
        reason,
    };

    let mut failure: Option<Error> = None;
    model.visit_params(&mut |name, t| {
        if failure.is_some() {
            return;
        }
        let Some(entry) = by_name.remove(name) else {
            failure = Some(bad(format!("missing parameter {name}")));
            return;
        };
        if entry.dims == t.shape() {
            for (dst, src) in t.data_mut().iter_mut().zip(&entry.values) {
                *dst = T::of_f32(*src);
            }
            return;
        }
        // 3->9 style first-conv adaptation: tile the channel axis.
        if name == "conv1.weight"
            && entry.dims.len() == 4
            && t.shape().len() == 4
            && entry.dims[0] == t.shape()[0]
            && entry.dims[2] == t.shape()[2]
            && entry.dims[3] == t.shape()[3]
            && entry.dims[1] != 0
            && t.shape()[1] % entry.dims[1] == 0
        {
            let (k_out, fc, kh, kw) = (entry.dims[0], entry.dims[1], entry.dims[2], entry.dims[3]);
            let mc = t.shape()[1];
            let scale = fc as f64 / mc as f64;
            let plane = kh * kw;
            for ko in 0..k_out {
                for c in 0..mc {
                    let src_c = c % fc;
                    for p in 0..plane {
                        let v = entry.values[(ko * fc + src_c) * plane + p] as f64 * scale;
                        t.data_mut()[(ko * mc + c) * plane + p] = T::of_f64(v);
                    }
                }
            }
            return;
        }
        failure = Some(bad(format!(
            "shape mismatch for {name}: file {:?} vs model {:?}",
            entry.dims,
            t.shape()
        )));
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let mut buf_failure: Option<Error> = None;
    model.visit_buffers(&mut |name, b| {
        if buf_failure.is_some() {
            return;
        }
        let Some(entry) = by_name.remove(name) else {
            buf_failure = Some(bad(format!("missing parameter {name}")));
            return;
        };
        if entry.dims != [b.len()] {
            buf_failure = Some(bad(format!(
                "shape mismatch for {name}: file {:?} vs model [{}]",
                entry.dims,
                b.len()
            )));
            return;
        }
        for (dst, src) in b.iter_mut().zip(&entry.values) {
            *dst = T::of_f32(*src);
        }
    });
    if let Some(e) = buf_failure {
        return Err(e);
    }

    if !by_name.is_empty() {
        let extra: Vec<&String> = by_name.keys().take(4).collect();
        return Err(bad(format!("unexpected entries {extra:?}")));
    }
    Ok(())
}
