//! KWSP/KWSE binary tensors and their CSV fallback.
//!
//! Binary layout (little-endian): 4-byte magic, `u32` version (=1), `u32` rows,
//! `u32` columns, then rows×columns `f32` values in row-major order.
//! The CSV form has a first line `rows,columns` followed by one line per row.

use std::io::{Read, Write};
use std::path::Path;

use super::gram::{EmbeddingMatrix, PosteriorGram, ROW_SUM_TOLERANCE};
use crate::error::{Error, Result};

pub const POSTERIOR_MAGIC: [u8; 4] = *b"KWSP";
pub const EMBEDDING_MAGIC: [u8; 4] = *b"KWSE";
pub const FORMAT_VERSION: u32 = 1;

/// Rows further than this from summing to 1 are rejected on load.
pub const LOAD_ROW_SUM_TOLERANCE: f64 = 1e-4;

fn write_matrix(
    mut w: impl Write,
    magic: [u8; 4],
    rows: usize,
    cols: usize,
    values: &[f64],
) -> std::io::Result<()> {
    let dim = |n: usize| {
        u32::try_from(n)
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))
    };
    let mut buf = Vec::with_capacity(16 + values.len() * 4);
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&dim(rows)?.to_le_bytes());
    buf.extend_from_slice(&dim(cols)?.to_le_bytes());
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_matrix(bytes: &[u8], magic: [u8; 4]) -> Result<(usize, usize, Vec<f64>)> {
    if bytes.len() < 16 {
        return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
    }
    if bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(&magic)
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "dimension mismatch: header says {rows}x{cols} ({expected} bytes), payload has {}",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok((rows, cols, values))
}

fn parse_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `rows,cols` header".into(),
    })?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad header {header:?}: {e}"),
        })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must have two fields, got {header:?}"),
        });
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (n, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: n + 1,
                message: e.to_string(),
            })?;
        if row.len() != cols {
            return Err(Error::Parse {
                line: n + 1,
                message: format!("expected {cols} values, found {}", row.len()),
            });
        }
        values.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Format(format!(
            "dimension mismatch: header says {rows} rows, found {seen}"
        )));
    }
    Ok((rows, cols, values))
}

fn to_csv(rows: usize, cols: usize, values: &[f64]) -> String {
    let mut out = format!("{rows},{cols}\n");
    for chunk in values.chunks(cols.max(1)) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

/// Renormalizes rows within [`LOAD_ROW_SUM_TOLERANCE`] of 1; rows already
/// within [`ROW_SUM_TOLERANCE`] are left untouched.
fn posteriors_from_values(rows: usize, cols: usize, mut values: Vec<f64>) -> Result<PosteriorGram> {
    if cols == 0 {
        return Err(Error::Format("vocabulary size is zero".into()));
    }
    for (row, chunk) in values.chunks_exact_mut(cols).enumerate() {
        if let Some(v) = chunk.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("row {row} has entry {v}")));
        }
        let sum: f64 = chunk.iter().sum();
        let off = (sum - 1.0).abs();
        if off > LOAD_ROW_SUM_TOLERANCE {
            return Err(Error::RowSum { row, sum });
        }
        if off > ROW_SUM_TOLERANCE {
            chunk.iter_mut().for_each(|v| *v /= sum);
        }
    }
    PosteriorGram::new(rows, cols, values)
}

pub fn decode_posteriors(bytes: &[u8]) -> Result<PosteriorGram> {
    let (rows, cols, values) = read_matrix(bytes, POSTERIOR_MAGIC)?;
    posteriors_from_values(rows, cols, values)
}

pub fn encode_posteriors(p: &PosteriorGram) -> Vec<u8> {
    let mut out = Vec::new();
    write_matrix(&mut out, POSTERIOR_MAGIC, p.frames(), p.vocab(), p.as_slice())
        .expect("writing to a Vec cannot fail");
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    let (rows, cols, values) = read_matrix(bytes, EMBEDDING_MAGIC)?;
    EmbeddingMatrix::new(rows, cols, values)
}

pub fn encode_embeddings(e: &EmbeddingMatrix) -> Vec<u8> {
    let mut out = Vec::new();
    write_matrix(&mut out, EMBEDDING_MAGIC, e.frames(), e.dim(), e.as_slice())
        .expect("writing to a Vec cannot fail");
    out
}

/// Loads a KWSP file, or the CSV form when the extension is `.csv`.
pub fn load_posteriors(path: impl AsRef<Path>) -> Result<PosteriorGram> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if is_csv(path) {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let (rows, cols, values) = parse_csv(&text)?;
        posteriors_from_values(rows, cols, values)
    } else {
        decode_posteriors(&bytes)
    }
}

pub fn save_posteriors(path: impl AsRef<Path>, p: &PosteriorGram) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_csv(path) {
        to_csv(p.frames(), p.vocab(), p.as_slice()).into_bytes()
    } else {
        encode_posteriors(p)
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads a KWSE file, or the CSV form when the extension is `.csv`.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    if is_csv(path) {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        let (rows, cols, values) = parse_csv(&text)?;
        EmbeddingMatrix::new(rows, cols, values)
    } else {
        decode_embeddings(&bytes)
    }
}

pub fn save_embeddings(path: impl AsRef<Path>, e: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let bytes = if is_csv(path) {
        to_csv(e.frames(), e.dim(), e.as_slice()).into_bytes()
    } else {
        encode_embeddings(e)
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
