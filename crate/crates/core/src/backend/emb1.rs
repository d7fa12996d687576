//! EMB1 embedding files.
//!
//! Layout: the four bytes `EMB1`, a little-endian `u32` dimension, a
//! little-endian `u32` row count, then `count * dim` little-endian `f32`
//! values in row-major order. Image ids live in a sidecar `<path>.ids` with
//! one UTF-8 id per line.

use std::fs;
use std::path::{Path, PathBuf};

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 12;

pub fn ids_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".ids");
    PathBuf::from(p)
}

/// Reads an EMB1 file and its id sidecar. Rows are normalized on load.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let matrix = decode(path, &bytes)?;

    let ids_file = ids_path(path);
    let ids_text = fs::read_to_string(&ids_file).map_err(|e| Error::io(&ids_file, e))?;
    let ids: Vec<String> = ids_text.lines().map(str::to_string).collect();
    if ids.len() != matrix.len() {
        return Err(Error::IdCountMismatch {
            ids: ids.len(),
            count: matrix.len(),
        });
    }
    Ok((ids, matrix))
}

fn decode(path: &Path, bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[HEADER_LEN..];
    let expected = dim * count * 4;
    if payload.len() != expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    if count == 0 {
        return Ok(EmbeddingMatrix::empty(dim));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    EmbeddingMatrix::from_rows(dim, values.chunks_exact(dim).map(<[f64]>::to_vec))
}

/// Writes `matrix` as EMB1 plus the `.ids` sidecar.
pub fn write_embeddings(path: impl AsRef<Path>, ids: &[String], matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    if ids.len() != matrix.len() {
        return Err(Error::IdCountMismatch {
            ids: ids.len(),
            count: matrix.len(),
        });
    }
    if let Some(bad) = ids.iter().find(|id| id.contains('\n') || id.contains('\r')) {
        return Err(Error::InvalidArgument(format!("image id {bad:?} contains a line break")));
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + matrix.len() * matrix.dim() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(matrix.dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(matrix.len() as u32).to_le_bytes());
    for row in matrix.rows() {
        for &v in row {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let mut sidecar = String::new();
    for id in ids {
        sidecar.push_str(id);
        sidecar.push('\n');
    }
    let ids_file = ids_path(path);
    fs::write(&ids_file, sidecar).map_err(|e| Error::io(&ids_file, e))
}
