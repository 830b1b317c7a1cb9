//! Raw field files: `<base>.hdr` holds `MFCEPI1 nx ny nt`, `<base>.bin` the
//! values as little-endian f64 in row-major `(t, x, y)` order.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array3, ArrayView3};

use crate::error::{Error, Result};

const MAGIC: &str = "MFCEPI1";

/// Field read back from disk. Dimensions are taken from the header and are
/// not required to form a valid solver grid (single slices have `nt = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub data: Array3<f64>,
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn header_path(base: &Path) -> PathBuf {
    with_ext(base, "hdr")
}

pub fn data_path(base: &Path) -> PathBuf {
    with_ext(base, "bin")
}

pub fn write_snapshot(base: &Path, data: ArrayView3<f64>) -> Result<()> {
    let (nt, nx, ny) = data.dim();
    let hdr = header_path(base);
    fs::write(&hdr, format!("{MAGIC} {nx} {ny} {nt}\n")).map_err(|e| Error::io(&hdr, e))?;
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let bin = data_path(base);
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))
}

pub fn read_snapshot(base: &Path) -> Result<Snapshot> {
    let hdr = header_path(base);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let bad = |reason: String| Error::Snapshot {
        path: hdr.clone(),
        reason,
    };
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != MAGIC {
        return Err(bad(format!("expected `{MAGIC} nx ny nt`, found `{}`", text.trim())));
    }
    let dims: Vec<usize> = fields[1..]
        .iter()
        .map(|s| s.parse::<usize>().map_err(|e| bad(format!("bad dimension `{s}`: {e}"))))
        .collect::<Result<_>>()?;
    let (nx, ny, nt) = (dims[0], dims[1], dims[2]);

    let bin = data_path(base);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expected = nx * ny * nt * 8;
    if bytes.len() != expected {
        return Err(Error::Snapshot {
            path: bin,
            reason: format!("expected {expected} bytes, found {}", bytes.len()),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let data = Array3::from_shape_vec((nt, nx, ny), values).expect("length checked");
    Ok(Snapshot { nx, ny, nt, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("f");
        let data = Array3::from_shape_fn((3, 4, 5), |(t, x, y)| (t as f64 + 0.1).powf(x as f64 - y as f64 / 3.0));
        write_snapshot(&base, data.view()).unwrap();
        let back = read_snapshot(&base).unwrap();
        assert_eq!((back.nx, back.ny, back.nt), (4, 5, 3));
        for (a, b) in data.iter().zip(back.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let hdr = fs::read_to_string(header_path(&base)).unwrap();
        assert_eq!(hdr, "MFCEPI1 4 5 3\n");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("g");
        write_snapshot(&base, Array3::zeros((1, 4, 4)).view()).unwrap();
        fs::write(data_path(&base), [0u8; 24]).unwrap();
        assert!(matches!(read_snapshot(&base), Err(Error::Snapshot { .. })));
        fs::write(header_path(&base), "NOPE 4 4 1").unwrap();
        assert!(matches!(read_snapshot(&base), Err(Error::Snapshot { .. })));
    }
}
