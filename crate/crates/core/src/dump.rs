//! Binary grid dumps with JSON sidecars.
//!
//! Layout (little endian, row-major):
//!
//! ```text
//! KLVAC1 | d: u32 | dims: d × u32 | h: f64 | mask: ceil(n/8) bytes, LSB first | labels: n × u32
//! KLEIG1 | d: u32 | dims: d × u32 | h: f64 | values: n × f64
//! ```
//!
//! The sidecar sits next to the dump with `.json` appended to the file name.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::domain::{DomainError, Lattice, VacancyDomain};

pub const VACANCY_MAGIC: &[u8; 6] = b"KLVAC1";
pub const FIELD_MAGIC: &[u8; 6] = b"KLEIG1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: expected magic {expected}, found {found:?}")]
    BadMagic { path: PathBuf, expected: &'static str, found: Vec<u8> },
    #[error("{path}: file ends early")]
    Truncated { path: PathBuf },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> DumpError + '_ {
    move |source| DumpError::Io { path: path.to_path_buf(), source }
}

fn header(magic: &[u8; 6], lattice: &Lattice) -> Vec<u8> {
    let mut out = magic.to_vec();
    out.extend_from_slice(&(lattice.dim() as u32).to_le_bytes());
    for &n in lattice.shape() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&lattice.spacing().to_le_bytes());
    out
}

fn write_with_sidecar(path: &Path, bytes: &[u8], sidecar: &impl Serialize) -> Result<(), DumpError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    fs::File::create(path).and_then(|mut f| f.write_all(bytes)).map_err(io_err(path))?;
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(sidecar)?;
    fs::write(&side, text + "\n").map_err(io_err(&side))?;
    Ok(())
}

/// Write the vacancy mask and labels of `domain`.
pub fn write_vacancy_dump(path: &Path, domain: &VacancyDomain, sidecar: &impl Serialize) -> Result<(), DumpError> {
    let lattice = domain.lattice();
    let mut bytes = header(VACANCY_MAGIC, lattice);
    let mut packed = vec![0u8; domain.mask().len().div_ceil(8)];
    for (i, &m) in domain.mask().iter().enumerate() {
        if m {
            packed[i / 8] |= 1 << (i % 8);
        }
    }
    bytes.extend_from_slice(&packed);
    for &l in domain.labels() {
        bytes.extend_from_slice(&l.to_le_bytes());
    }
    write_with_sidecar(path, &bytes, sidecar)
}

/// Write a real grid function (full lattice, row-major).
pub fn write_field_dump(
    path: &Path,
    lattice: &Lattice,
    values: &[f64],
    sidecar: &impl Serialize,
) -> Result<(), DumpError> {
    if values.len() != lattice.node_count() {
        return Err(DumpError::Malformed {
            path: path.to_path_buf(),
            reason: format!("{} values for {} nodes", values.len(), lattice.node_count()),
        });
    }
    let mut bytes = header(FIELD_MAGIC, lattice);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_with_sidecar(path, &bytes, sidecar)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DumpError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(DumpError::Truncated { path: self.path.to_path_buf() });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, DumpError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, DumpError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_header<'a>(path: &'a Path, bytes: &'a [u8], magic: &'static [u8; 6]) -> Result<(Cursor<'a>, Lattice), DumpError> {
    let mut cur = Cursor { path, bytes, pos: 0 };
    let found = cur.take(6)?;
    if found != magic {
        return Err(DumpError::BadMagic {
            path: path.to_path_buf(),
            expected: std::str::from_utf8(magic).unwrap(),
            found: found.to_vec(),
        });
    }
    let d = cur.u32()? as usize;
    if d == 0 || d > 3 {
        return Err(DumpError::Malformed { path: path.to_path_buf(), reason: format!("dimension {d}") });
    }
    let shape = (0..d).map(|_| cur.u32().map(|n| n as usize)).collect::<Result<Vec<_>, _>>()?;
    let h = cur.f64()?;
    Ok((cur, Lattice::from_shape(shape, h)?))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, DumpError> {
    let mut bytes = Vec::new();
    fs::File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
    Ok(bytes)
}

/// Read a `KLVAC1` dump back into a domain (labels as stored).
pub fn read_vacancy_dump(path: &Path) -> Result<VacancyDomain, DumpError> {
    let bytes = read_bytes(path)?;
    let (mut cur, lattice) = read_header(path, &bytes, VACANCY_MAGIC)?;
    let n = lattice.node_count();
    let packed = cur.take(n.div_ceil(8))?;
    let mask: Vec<bool> = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
    let labels = (0..n).map(|_| cur.u32()).collect::<Result<Vec<_>, _>>()?;
    if let Some(i) = (0..n).find(|&i| mask[i] != (labels[i] > 0)) {
        return Err(DumpError::Malformed {
            path: path.to_path_buf(),
            reason: format!("node {i}: mask {} but label {}", mask[i], labels[i]),
        });
    }
    Ok(VacancyDomain::from_parts(lattice, mask, labels)?)
}

/// Read a `KLEIG1` dump.
pub fn read_field_dump(path: &Path) -> Result<(Lattice, Vec<f64>), DumpError> {
    let bytes = read_bytes(path)?;
    let (mut cur, lattice) = read_header(path, &bytes, FIELD_MAGIC)?;
    let values = (0..lattice.node_count()).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
    Ok((lattice, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacancy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::from_shape(vec![3, 5], 0.25).unwrap();
        let mask: Vec<bool> = (0..15).map(|i| i % 4 != 1).collect();
        let dom = VacancyDomain::from_mask(lat, mask).unwrap();
        let path = dir.path().join("a.klvac");
        write_vacancy_dump(&path, &dom, &serde_json::json!({"k": dom.component_count()})).unwrap();
        let back = read_vacancy_dump(&path).unwrap();
        assert_eq!(back.mask(), dom.mask());
        assert_eq!(back.labels(), dom.labels());
        assert_eq!(back.lattice(), dom.lattice());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..6], b"KLVAC1");
        assert_eq!(bytes.len(), 6 + 4 + 8 + 8 + 2 + 15 * 4);
        assert!(sidecar_path(&path).exists());
    }

    #[test]
    fn field_round_trip_and_magic_check() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::from_shape(vec![2, 2, 2], 0.5).unwrap();
        let values: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let path = dir.path().join("phi.kleig");
        write_field_dump(&path, &lat, &values, &serde_json::json!({})).unwrap();
        let (l, v) = read_field_dump(&path).unwrap();
        assert_eq!(l, lat);
        assert_eq!(v, values);
        assert!(matches!(read_vacancy_dump(&path), Err(DumpError::BadMagic { .. })));
        fs::write(&path, b"KLEIG1\x02\x00").unwrap();
        assert!(matches!(read_field_dump(&path), Err(DumpError::Truncated { .. })));
    }
}
