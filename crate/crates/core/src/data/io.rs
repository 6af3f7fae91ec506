//! Line-delimited JSON dataset files.
//!
//! ```text
//! {"format":"gmc-dataset","version":1,"obs_dim":2,"source":"spiral","num_trajectories":2,"num_observations":120}
//! {"id":0,"split":"train","obs":[0.0000000000000000e0,...]}
//! ```
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Source, Split, Trajectory, TrajectoryDataset};
use crate::error::{Error, Result};
use crate::tensor::Vector;

pub const DATASET_FORMAT: &str = "gmc-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    obs_dim: usize,
    source: Source,
    num_trajectories: usize,
    num_observations: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: u64,
    split: Split,
    obs: Vec<f64>,
}

pub fn dataset_to_string(ds: &TrajectoryDataset) -> Result<String> {
    ds.validate()?;
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        obs_dim: ds.obs_dim,
        source: ds.source,
        num_trajectories: ds.len(),
        num_observations: ds.num_observations(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (t, split) in ds.trajectories.iter().zip(&ds.split) {
        let split = match split {
            Split::Train => "train",
            Split::Validation => "validation",
        };
        write!(out, "{{\"id\":{},\"split\":\"{split}\",\"obs\":[", t.id).unwrap();
        let mut first = true;
        for v in t.observations.iter().flat_map(|o| o.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("trajectory {} holds a non-finite value", t.id)));
            }
            if !first {
                out.push(',');
            }
            first = false;
            write!(out, "{v:.16e}").unwrap();
        }
        out.push_str("]}\n");
    }
    Ok(out)
}

pub fn save_dataset(ds: &TrajectoryDataset, path: &Path) -> Result<()> {
    let text = dataset_to_string(ds)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset> {
    let bytes = fs::read(path)?;
    dataset_from_bytes(&bytes)
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<TrajectoryDataset> {
    let mut offset = 0usize;
    let mut lines = Vec::new();
    while offset < bytes.len() {
        let end = bytes[offset..].iter().position(|&b| b == b'\n');
        let Some(end) = end else {
            return Err(Error::Corrupt {
                offset: bytes.len() as u64,
                msg: "file ends in the middle of a record".into(),
            });
        };
        lines.push((offset, &bytes[offset..offset + end]));
        offset += end + 1;
    }
    let corrupt = |offset: usize, msg: String| Error::Corrupt {
        offset: offset as u64,
        msg,
    };
    let (h_off, h_line) = *lines.first().ok_or_else(|| corrupt(0, "empty dataset file".into()))?;
    let header: Header =
        serde_json::from_slice(h_line).map_err(|e| corrupt(h_off + e.column().saturating_sub(1), format!("bad header: {e}")))?;
    if header.format != DATASET_FORMAT {
        return Err(corrupt(h_off, format!("unknown format `{}`", header.format)));
    }
    if header.version != DATASET_VERSION {
        return Err(corrupt(
            h_off,
            format!("unsupported version {} (expected {DATASET_VERSION})", header.version),
        ));
    }
    if header.obs_dim == 0 {
        return Err(corrupt(h_off, "obs_dim must be positive".into()));
    }
    let body = &lines[1..];
    if body.len() != header.num_trajectories {
        return Err(corrupt(
            bytes.len(),
            format!("header announces {} trajectories, found {}", header.num_trajectories, body.len()),
        ));
    }
    let mut trajectories = Vec::with_capacity(body.len());
    let mut split = Vec::with_capacity(body.len());
    for &(off, line) in body {
        let rec: Record =
            serde_json::from_slice(line).map_err(|e| corrupt(off + e.column().saturating_sub(1), format!("bad record: {e}")))?;
        if rec.obs.len() % header.obs_dim != 0 {
            return Err(corrupt(
                off,
                format!("trajectory {} has {} values, not a multiple of obs_dim {}", rec.id, rec.obs.len(), header.obs_dim),
            ));
        }
        let observations: Vec<Vector> = rec.obs.chunks(header.obs_dim).map(|c| Vector::new(c.to_vec())).collect();
        trajectories.push(Trajectory {
            id: rec.id,
            observations,
        });
        split.push(rec.split);
    }
    let ds = TrajectoryDataset {
        trajectories,
        obs_dim: header.obs_dim,
        source: header.source,
        split,
    };
    if ds.num_observations() != header.num_observations {
        return Err(corrupt(
            bytes.len(),
            format!("header announces {} observations, found {}", header.num_observations, ds.num_observations()),
        ));
    }
    ds.validate()?;
    Ok(ds)
}
