//! File formats.
//!
//! `JSA1` matrix layout (all little-endian):
//!
//! | bytes  | content                                        |
//! |--------|------------------------------------------------|
//! | 4      | magic `JSA1`                                   |
//! | 4 + 4  | `u32` rows, `u32` cols                         |
//! | 8 + 8  | `f64` grid resolution, `f64` grid span         |
//! | 1      | domain tag: 0 frequency (GHz), 1 time (ps)     |
//! | 16·n   | row-major `(f64 re, f64 im)` pairs             |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::countsim::TimeTagStream;
use crate::error::{Error, Result};
use crate::grid::{ComplexMatrix, Domain};

pub const MAGIC: &[u8; 4] = b"JSA1";
pub const HEADER_BYTES: usize = 29;

/// Size in bytes of a `JSA1` file holding a `rows × cols` matrix.
pub fn matrix_file_size(rows: usize, cols: usize) -> usize {
    HEADER_BYTES + 16 * rows * cols
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixHeader {
    pub rows: u32,
    pub cols: u32,
    pub resolution: f64,
    pub span: f64,
    pub domain: Domain,
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, std::io::Error::other("path has no file name")))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn encode_matrix(m: &ComplexMatrix, resolution: f64, span: f64) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Format("too many columns".into()))?;
    let mut out = Vec::with_capacity(matrix_file_size(m.rows(), m.cols()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&resolution.to_le_bytes());
    out.extend_from_slice(&span.to_le_bytes());
    out.push(m.domain().tag());
    for z in m.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(ComplexMatrix, MatrixHeader)> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected JSA1".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let rows = u32_at(4);
    let cols = u32_at(8);
    let resolution = f64_at(12);
    let span = f64_at(20);
    let domain = Domain::from_tag(bytes[28]).ok_or_else(|| Error::Format(format!("unknown domain tag {}", bytes[28])))?;
    let n = rows as usize * cols as usize;
    let expected = matrix_file_size(rows as usize, cols as usize);
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let data: Vec<Complex64> = (0..n)
        .map(|i| {
            let o = HEADER_BYTES + 16 * i;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    let m = ComplexMatrix::new(rows as usize, cols as usize, data, domain)?;
    Ok((
        m,
        MatrixHeader {
            rows,
            cols,
            resolution,
            span,
            domain,
        },
    ))
}

/// Writes `m` in `JSA1` format. `resolution`/`span` describe the grid of the
/// matrix's domain: GHz for frequency, ps for time.
pub fn write_matrix(path: impl AsRef<Path>, m: &ComplexMatrix, resolution: f64, span: f64) -> Result<()> {
    write_atomic(path.as_ref(), &encode_matrix(m, resolution, span)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<(ComplexMatrix, MatrixHeader)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// CSV with a header row; values are written with Rust's shortest
/// round-trip formatting.
pub fn write_csv<R, I>(path: impl AsRef<Path>, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: ToString,
{
    let path = path.as_ref();
    write_atomic(path, &csv_bytes(header, rows).map_err(|e| Error::io(path, e))?)
}

pub fn csv_bytes<R, I>(header: &[&str], rows: I) -> std::io::Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: ToString,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(path.as_ref(), text.as_bytes())
}

/// `channel<TAB>time_ps` lines of all streams merged in time order (ties in
/// channel order).
pub fn timetag_text(streams: &[TimeTagStream]) -> String {
    let mut all: Vec<(i64, u8)> = streams
        .iter()
        .flat_map(|s| s.tags().iter().map(move |&t| (t, s.channel())))
        .collect();
    all.sort_unstable();
    let mut out = String::with_capacity(all.len() * 16);
    for (t, ch) in all {
        out.push_str(&format!("{ch}\t{t}\n"));
    }
    out
}

pub fn write_timetags(path: impl AsRef<Path>, streams: &[TimeTagStream]) -> Result<()> {
    write_atomic(path.as_ref(), timetag_text(streams).as_bytes())
}
