//! Matrix files: CSV (one matrix row per line) and the `UPMAT` binary
//! container (magic, rows, cols as little-endian u64, then column-major
//! little-endian f64 entries).

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::Mat;
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"UPMAT\0\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` and `.txt` are text; anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn write_matrix_binary(w: &mut impl Write, m: &Mat) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix_binary(r: &mut impl Read) -> Result<Mat> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("bad matrix magic".into()));
    }
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    let mut data = Vec::with_capacity(len.min(1 << 24));
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Mat::new(rows, cols, data)
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Writes one matrix row per line. Values use Rust's shortest round-trip
/// formatting, so reading back is exact.
pub fn write_matrix_csv(w: &mut impl Write, m: &Mat) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| format!("{}", m.get(i, j))).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// Lines starting with `#` and blank lines are skipped.
pub fn read_matrix_csv(r: impl Read) -> Result<Mat> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("empty matrix file".into()));
    }
    Mat::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => write_matrix_csv(&mut f, m)?,
        MatrixFormat::Binary => write_matrix_binary(&mut f, m)?,
    }
    f.flush()?;
    Ok(())
}

/// Reads either format, sniffing the binary magic first.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MATRIX_MAGIC) {
        read_matrix_binary(&mut bytes.as_slice())
    } else {
        read_matrix_csv(bytes.as_slice())
    }
}
