//! Dataset files: binary `.npts`, its text counterpart, and `.key` answer
//! files.

use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{GeometryError, PointSet};

pub const NPTS_MAGIC: &[u8; 4] = b"NPTS";
pub const NPTS_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed point file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn format<T>(m: impl Into<String>) -> Result<T, IoError> {
    Err(IoError::Format(m.into()))
}

pub fn write_npts(points: &PointSet, mut out: impl Write) -> Result<(), IoError> {
    let mut buf = Vec::with_capacity(26 + points.coords().len() * 8);
    buf.extend_from_slice(NPTS_MAGIC);
    buf.extend_from_slice(&NPTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(points.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(points.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&points.phi().to_le_bytes());
    for &c in points.coords() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_npts(bytes: &[u8]) -> Result<PointSet, IoError> {
    if bytes.len() < 26 || &bytes[..4] != NPTS_MAGIC {
        return format("missing NPTS header");
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != NPTS_VERSION {
        return format(format!("unsupported version {version}"));
    }
    let n = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let d = u32::from_le_bytes(bytes[14..18].try_into().unwrap()) as u64;
    let phi = i64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let body = &bytes[26..];
    match n.checked_mul(d).and_then(|c| c.checked_mul(8)) {
        Some(len) if len == body.len() as u64 => {}
        _ => return format(format!("expected {n}×{d} coordinates, found {} bytes", body.len())),
    }
    let coords = body
        .chunks_exact(8)
        .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(PointSet::new(d as usize, phi, coords)?)
}

/// Parses `n d Phi` followed by `n` rows of `d` integers.
pub fn read_text(text: &str) -> Result<PointSet, IoError> {
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| -> Result<i64, IoError> {
        let t = tokens.next().ok_or_else(|| IoError::Format(format!("missing {what}")))?;
        t.parse::<i64>().map_err(|_| IoError::Format(format!("bad {what}: {t:?}")))
    };
    let n = next("n")?;
    let d = next("d")?;
    let phi = next("Phi")?;
    if n < 0 || d < 0 {
        return format("negative size");
    }
    let total = (n as u64).checked_mul(d as u64).filter(|&t| t <= text.len() as u64);
    let Some(total) = total else {
        return format("fewer coordinates than announced");
    };
    let coords = (0..total).map(|_| next("coordinate")).collect::<Result<Vec<_>, _>>()?;
    if tokens.next().is_some() {
        return format("trailing tokens");
    }
    Ok(PointSet::new(d as usize, phi, coords)?)
}

pub fn write_text(points: &PointSet) -> String {
    let mut s = format!("{} {} {}\n", points.len(), points.dim(), points.phi());
    for row in points.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

/// Loads either format, sniffing the magic bytes.
pub fn load_points(path: &Path) -> Result<PointSet, IoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.starts_with(NPTS_MAGIC) {
        read_npts(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| IoError::Format("not NPTS and not UTF-8 text".into()))?;
        read_text(&text)
    }
}

pub fn save_points(path: &Path, points: &PointSet) -> Result<(), IoError> {
    write_npts(points, io::BufWriter::new(std::fs::File::create(path)?))
}

/// One line of an answer key: query `(i, j)` should return `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyEntry {
    pub i: usize,
    pub j: usize,
    pub expected: usize,
}

pub fn write_key(entries: &[KeyEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        writeln!(s, "{} {} {}", e.i, e.j, e.expected).unwrap();
    }
    s
}

pub fn read_key(text: &str) -> Result<Vec<KeyEntry>, IoError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let v: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| IoError::Format(format!("bad key line {line:?}"))))
                .collect::<Result<_, _>>()?;
            match v[..] {
                [i, j, expected] => Ok(KeyEntry { i, j, expected }),
                _ => format(format!("bad key line {line:?}")),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn npts_layout() {
        let pts = PointSet::new(2, 8, vec![1, -2, 3, 8]).unwrap();
        let mut buf = Vec::new();
        write_npts(&pts, &mut buf).unwrap();
        assert_eq!(buf.len(), 26 + 32);
        assert_eq!(&buf[..6], b"NPTS\x01\x00");
        assert_eq!(&buf[6..14], &2u64.to_le_bytes());
        assert_eq!(&buf[26..34], &1i64.to_le_bytes());
        assert_eq!(read_npts(&buf).unwrap(), pts);
        assert!(read_npts(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let pts = PointSet::new(3, 4, vec![0, 1, -4, 2, 2, 2]).unwrap();
        assert_eq!(read_text(&write_text(&pts)).unwrap(), pts);
        assert!(read_text("1 2 4\n1").is_err());
        assert!(read_text("1 1 4\n9").is_err());
    }

    #[test]
    fn key_roundtrip() {
        let k = vec![KeyEntry { i: 0, j: 3, expected: 7 }, KeyEntry { i: 1, j: 0, expected: 65 }];
        assert_eq!(read_key(&write_key(&k)).unwrap(), k);
        assert!(read_key("1 2").is_err());
    }
}
