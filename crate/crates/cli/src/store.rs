//! On-disk artifacts: content hashes, CSV tables and JSON summaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mfgas_core::ParticleSet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// An output file relative to the run directory with the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    sha256_hex(&serde_json::to_vec(value).expect("serializable value"))
}

pub fn file_hash(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| sha256_hex(&b))
}

/// Writes `bytes` to `root/rel`, creating directories.
pub fn write_file(root: &Path, rel: &Path, bytes: &[u8]) -> Result<OutputFile, CliError> {
    let path = root.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(OutputFile { path: rel.to_path_buf(), sha256: sha256_hex(bytes) })
}

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(path, e))
}

/// Configurations of one sample stage in (replica, frame) order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub dim: usize,
    pub frames: u64,
    pub configs: Vec<ParticleSet>,
}

impl SampleTable {
    /// CSV with one row per particle: `replica,frame,x0[,x1,…]`.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["replica".to_string(), "frame".to_string()];
        header.extend((0..self.dim).map(|d| format!("x{d}")));
        w.write_record(&header).map_err(csv_error)?;
        for (i, c) in self.configs.iter().enumerate() {
            let (replica, frame) = (i as u64 / self.frames, i as u64 % self.frames);
            for p in c.points() {
                let mut row = vec![replica.to_string(), frame.to_string()];
                row.extend(p.iter().map(|x| x.to_string()));
                w.write_record(&row).map_err(csv_error)?;
            }
        }
        w.into_inner().map_err(|e| csv_error(e.into_error()))
    }

    /// Inverse of [`SampleTable::to_csv`]; `counts` restores configurations without particles.
    pub fn from_csv(path: &Path, dim: usize, frames: u64, counts: &[usize]) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e))?;
        let mut rows = r.records();
        let mut configs = Vec::with_capacity(counts.len());
        for (i, &count) in counts.iter().enumerate() {
            let (replica, frame) = ((i as u64 / frames).to_string(), (i as u64 % frames).to_string());
            let mut coords = Vec::with_capacity(count * dim);
            for _ in 0..count {
                let row = rows
                    .next()
                    .ok_or_else(|| CliError::data(path, "fewer rows than recorded"))?
                    .map_err(|e| CliError::data(path, e))?;
                if row.len() != dim + 2 || row[0] != replica || row[1] != frame {
                    return Err(CliError::data(path, format!("unexpected row {row:?}")));
                }
                for field in row.iter().skip(2) {
                    coords.push(field.parse::<f64>().map_err(|e| CliError::data(path, e))?);
                }
            }
            configs.push(ParticleSet::new(dim, coords).map_err(|e| CliError::data(path, e))?);
        }
        if rows.next().is_some() {
            return Err(CliError::data(path, "more rows than recorded"));
        }
        Ok(Self { dim, frames, configs })
    }
}

fn csv_error(e: impl ToString) -> CliError {
    CliError::Data { path: PathBuf::from("<csv>"), reason: e.to_string() }
}
