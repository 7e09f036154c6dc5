//! Little-endian binary CSR container.
//!
//! ```text
//! magic      4 bytes  "ASCR"
//! version    u32      1
//! n_rows     u64
//! n_cols     u64
//! nnz        u64
//! has_values u8       0 or 1
//! rowptr     u64 * (n_rows + 1)
//! colind     u32 * nnz
//! val        f32 * nnz   (only when has_values = 1)
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{validate, CsrMatrix, CsrViolation};

pub const MAGIC: &[u8; 4] = b"ASCR";
pub const FORMAT_VERSION: u32 = 1;

const CHUNK: usize = 1 << 16;

#[derive(Debug, thiserror::Error)]
pub enum CsrIoError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected \"ASCR\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("malformed header field `{field}`: {reason}")]
    Header { field: &'static str, reason: String },
    #[error("truncated `{0}` array")]
    Truncated(&'static str),
    #[error("invalid matrix: {0}")]
    Invalid(#[from] CsrViolation),
}

fn read_array<T, const W: usize>(
    r: &mut impl Read,
    len: usize,
    field: &'static str,
    decode: impl Fn([u8; W]) -> T,
) -> Result<Vec<T>, CsrIoError> {
    let mut out = Vec::with_capacity(len.min(CHUNK));
    let mut buf = vec![0u8; CHUNK * W];
    let mut remaining = len;
    while remaining > 0 {
        let take = remaining.min(CHUNK);
        let bytes = &mut buf[..take * W];
        r.read_exact(bytes).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => CsrIoError::Truncated(field),
            _ => CsrIoError::Io(e),
        })?;
        out.extend(bytes.chunks_exact(W).map(|c| decode(c.try_into().unwrap())));
        remaining -= take;
    }
    Ok(out)
}

fn read_u64(r: &mut impl Read, field: &'static str) -> Result<u64, CsrIoError> {
    Ok(read_array(r, 1, field, u64::from_le_bytes)?[0])
}

fn header_usize(value: u64, field: &'static str) -> Result<usize, CsrIoError> {
    usize::try_from(value).map_err(|_| CsrIoError::Header {
        field,
        reason: format!("{value} does not fit in usize"),
    })
}

pub fn read_csr(mut r: impl Read) -> Result<CsrMatrix, CsrIoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CsrIoError::Truncated("magic"))?;
    if &magic != MAGIC {
        return Err(CsrIoError::BadMagic(magic));
    }
    let version = read_array(&mut r, 1, "version", u32::from_le_bytes)?[0];
    if version != FORMAT_VERSION {
        return Err(CsrIoError::Version(version));
    }
    let n_rows = header_usize(read_u64(&mut r, "n_rows")?, "n_rows")?;
    let n_cols = header_usize(read_u64(&mut r, "n_cols")?, "n_cols")?;
    let nnz = header_usize(read_u64(&mut r, "nnz")?, "nnz")?;
    if n_cols > u32::MAX as usize + 1 {
        return Err(CsrIoError::Header {
            field: "n_cols",
            reason: format!("{n_cols} exceeds the 32-bit column index range"),
        });
    }
    let has_values = match read_array(&mut r, 1, "has_values", |b: [u8; 1]| b[0])?[0] {
        0 => false,
        1 => true,
        other => {
            return Err(CsrIoError::Header {
                field: "has_values",
                reason: format!("expected 0 or 1, found {other}"),
            })
        }
    };
    let rowptr_len = n_rows.checked_add(1).ok_or_else(|| CsrIoError::Header {
        field: "n_rows",
        reason: "overflow".into(),
    })?;
    let rowptr = read_array(&mut r, rowptr_len, "rowptr", |b| {
        u64::from_le_bytes(b) as usize
    })?;
    if rowptr[n_rows] != nnz {
        return Err(CsrViolation::RowptrNnzMismatch {
            last: rowptr[n_rows],
            nnz,
        }
        .into());
    }
    let colind = read_array(&mut r, nnz, "colind", u32::from_le_bytes)?;
    let val = if has_values {
        Some(read_array(&mut r, nnz, "val", f32::from_le_bytes)?)
    } else {
        None
    };
    validate(n_rows, n_cols, &rowptr, &colind, val.as_deref())?;
    Ok(CsrMatrix::from_parts_unchecked(
        n_rows, n_cols, rowptr, colind, val,
    ))
}

pub fn write_csr(m: &CsrMatrix, mut w: impl Write) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for x in [m.n_rows(), m.n_cols(), m.nnz()] {
        w.write_all(&(x as u64).to_le_bytes())?;
    }
    w.write_all(&[m.has_values() as u8])?;
    for &p in m.rowptr() {
        w.write_all(&(p as u64).to_le_bytes())?;
    }
    for &c in m.colind() {
        w.write_all(&c.to_le_bytes())?;
    }
    if let Some(val) = m.values() {
        for &v in val {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn load_csr(path: impl AsRef<Path>) -> Result<CsrMatrix, CsrIoError> {
    read_csr(BufReader::new(File::open(path)?))
}

pub fn save_csr(m: &CsrMatrix, path: impl AsRef<Path>) -> io::Result<()> {
    write_csr(m, BufWriter::new(File::create(path)?))
}
