//! `FCK1` binary matrix container.
//!
//! Layout: magic `b"FCK1"`, `rows: u32 LE`, `cols: u32 LE`, then
//! `rows × cols` IEEE-754 `f64 LE` values in row-major order. Vectors are
//! stored as `1 × dim` matrices.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Matrix, Vector};
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"FCK1";

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>> {
    let rows =
        u32::try_from(m.rows()).map_err(|_| Error::invalid_argument("row count exceeds u32"))?;
    let cols =
        u32::try_from(m.cols()).map_err(|_| Error::invalid_argument("column count exceeds u32"))?;
    let mut out = Vec::with_capacity(12 + 8 * m.as_slice().len());
    out.extend_from_slice(&MATRIX_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for x in m.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let mut reader = ByteReader::new(bytes);
    if reader.take(4)? != MATRIX_MAGIC {
        return Err(Error::format("bad magic, expected FCK1"));
    }
    let rows = reader.u32()? as usize;
    let cols = reader.u32()? as usize;
    let data = reader.f64_array(rows * cols)?;
    reader.finish()?;
    Matrix::new(rows, cols, data).map_err(|e| Error::format(e.to_string()))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    decode_matrix(&fs::read(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    write_atomic(path, &encode_matrix(m)?)
}

/// Reads a vector stored as a `1 × dim` matrix.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Vector> {
    let m = read_matrix(path)?;
    if m.rows() != 1 {
        return Err(Error::format(format!(
            "vector file must hold a 1xN matrix, found {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Vector::new(m.into_vec())
}

pub fn write_vector(path: impl AsRef<Path>, v: &Vector) -> Result<()> {
    write_matrix(path, &Matrix::from_raw(1, v.dim(), v.as_slice().to_vec()))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partially written file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Cursor over a byte buffer that reports short reads as format errors.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|end| *end <= self.bytes.len())
            .ok_or_else(|| {
                Error::format(format!(
                    "truncated: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f64_array(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count
            .checked_mul(8)
            .ok_or_else(|| Error::format("payload size overflows"))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}
