//! Binary matrix files.
//!
//! Layout (all integers little-endian):
//!
//! | bytes  | content                                              |
//! |--------|------------------------------------------------------|
//! | 0..8   | magic `SYMKMAT1`                                     |
//! | 8..12  | `u32` rows                                           |
//! | 12..16 | `u32` cols                                           |
//! | 16     | `u8` storage flag: 0 dense row-major, 1 packed lower |
//! | 17..24 | zero padding                                         |
//! | 24..   | IEEE-754 binary64 values in storage order            |
//!
//! Packed files always have `rows == cols` and carry `n(n+1)/2` values.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::{packed_len, Matrix, PackedTriangular};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"SYMKMAT1";
const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub enum StoredMatrix<T> {
    Dense(Matrix<T>),
    Packed(PackedTriangular<T>),
}

fn header(rows: usize, cols: usize, flag: u8) -> Result<[u8; HEADER_LEN]> {
    let rows = u32::try_from(rows).map_err(|_| Error::Format("row count exceeds u32".into()))?;
    let cols = u32::try_from(cols).map_err(|_| Error::Format("column count exceeds u32".into()))?;
    let mut h = [0u8; HEADER_LEN];
    h[..8].copy_from_slice(MAGIC);
    h[8..12].copy_from_slice(&rows.to_le_bytes());
    h[12..16].copy_from_slice(&cols.to_le_bytes());
    h[16] = flag;
    Ok(h)
}

fn write_values<T: Scalar, W: Write>(w: &mut W, values: &[T]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

pub fn write_dense<T: Scalar, W: Write>(w: &mut W, m: &Matrix<T>) -> Result<()> {
    w.write_all(&header(m.rows(), m.cols(), 0)?)?;
    write_values(w, m.as_slice())
}

pub fn write_packed<T: Scalar, W: Write>(w: &mut W, m: &PackedTriangular<T>) -> Result<()> {
    w.write_all(&header(m.n(), m.n(), 1)?)?;
    write_values(w, m.as_slice())
}

pub fn write_stored<T: Scalar, W: Write>(w: &mut W, m: &StoredMatrix<T>) -> Result<()> {
    match m {
        StoredMatrix::Dense(d) => write_dense(w, d),
        StoredMatrix::Packed(p) => write_packed(w, p),
    }
}

pub fn read_matrix<T: Scalar, R: Read>(r: &mut R) -> Result<StoredMatrix<T>> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h).map_err(|_| Error::Format("truncated header".into()))?;
    if &h[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if h[17..].iter().any(|&b| b != 0) {
        return Err(Error::Format("non-zero padding".into()));
    }
    let rows = u32::from_le_bytes(h[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(h[12..16].try_into().unwrap()) as usize;
    let count = match h[16] {
        0 => rows * cols,
        1 if rows == cols => packed_len(rows),
        1 => return Err(Error::Format(format!("packed matrix must be square, got {rows}x{cols}"))),
        f => return Err(Error::Format(format!("unknown storage flag {f}"))),
    };
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated payload".into()))?;
        values.push(T::from_f64_lossy(f64::from_le_bytes(buf)));
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(if h[16] == 0 {
        StoredMatrix::Dense(Matrix::from_vec(rows, cols, values)?)
    } else {
        StoredMatrix::Packed(PackedTriangular::from_vec(rows, values)?)
    })
}
