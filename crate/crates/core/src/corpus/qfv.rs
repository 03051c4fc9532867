//! QFV1 feature blobs.
//!
//! Layout: the 4 magic bytes `QFV1`, then two little-endian `u32` values
//! (row count, dimension), then `rows * dim` little-endian IEEE-754 `f32`
//! values in row-major order. Nothing may follow the last value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QFV1";

/// A row-major `f32` matrix as stored in a QFV1 blob.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Option<Self> {
        if rows.checked_mul(dim)? != data.len() {
            return None;
        }
        Some(Self { rows, dim, data })
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f32]>) -> Option<Self> {
        let mut data = Vec::new();
        let mut count = 0;
        for row in rows {
            if row.len() != dim {
                return None;
            }
            data.extend_from_slice(row);
            count += 1;
        }
        Some(Self {
            rows: count,
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

pub fn read_from(mut reader: impl Read, origin: &Path) -> Result<FeatureMatrix> {
    let mut header = [0u8; 12];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::format(origin, "truncated QFV1 header"))?;
    if &header[..4] != MAGIC {
        return Err(Error::format(origin, "bad magic bytes, expected QFV1"));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| Error::format(origin, "row count overflows"))?;

    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(origin, e))?;
    if bytes.len() != count * 4 {
        return Err(Error::format(
            origin,
            format!(
                "payload holds {} bytes, header declares {rows}x{dim} floats ({} bytes)",
                bytes.len(),
                count * 4
            ),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureMatrix { rows, dim, data })
}

pub fn write_to(mut writer: impl Write, matrix: &FeatureMatrix) -> std::io::Result<()> {
    let too_big = |_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "matrix too large");
    writer.write_all(MAGIC)?;
    writer.write_all(&u32::try_from(matrix.rows).map_err(too_big)?.to_le_bytes())?;
    writer.write_all(&u32::try_from(matrix.dim).map_err(too_big)?.to_le_bytes())?;
    for v in &matrix.data {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()
}

pub fn read_qfv(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(BufReader::new(file), path)
}

pub fn write_qfv(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_to(BufWriter::new(file), matrix).map_err(|e| Error::io(path, e))
}
