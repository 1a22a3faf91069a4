//! `SQGF` binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes    | content                                 |
//! |----------|-----------------------------------------|
//! | 4        | magic `b"SQGF"`                         |
//! | 4        | format version (`u32`)                  |
//! | 4        | `n` (`u32`)                             |
//! | 8        | `gamma` (`f64`)                         |
//! | 8        | `time` (`f64`)                          |
//! | 8 · n²   | physical samples (`f64`), row-major     |

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::spectral::{Grid, ScalarField, SpectralError};

pub const MAGIC: [u8; 4] = *b"SQGF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid field in snapshot: {0}")]
    Field(#[from] SpectralError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub gamma: f64,
    pub time: f64,
    pub field: ScalarField,
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> Result<(), SnapshotError> {
    let n = snap.field.grid().n() as u32;
    let mut buf = Vec::with_capacity(28 + 8 * snap.field.values().len());
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&snap.gamma.to_le_bytes());
    buf.extend_from_slice(&snap.time.to_le_bytes());
    for v in snap.field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot, SnapshotError> {
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if b4 != MAGIC {
        return Err(SnapshotError::BadMagic(b4));
    }
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != FORMAT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    r.read_exact(&mut b4)?;
    let grid = Grid::new(u32::from_le_bytes(b4) as usize)?;
    r.read_exact(&mut b8)?;
    let gamma = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let time = f64::from_le_bytes(b8);
    let mut raw = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Snapshot {
        gamma,
        time,
        field: ScalarField::from_values(grid, values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid::new(16).unwrap();
        let snap = Snapshot {
            gamma: 0.8,
            time: 0.25,
            field: ScalarField::from_fn(g, |x, y| (2.0 * PI * (x - y)).sin()).unwrap(),
        };
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &snap).unwrap();
        assert_eq!(bytes.len(), 28 + 8 * 256);
        assert_eq!(&bytes[0..4], b"SQGF");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[16, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &0.8f64.to_le_bytes());
        assert_eq!(&bytes[20..28], &0.25f64.to_le_bytes());
        assert_eq!(&bytes[28..36], &snap.field.values()[0].to_le_bytes());
        assert_eq!(read_snapshot(&bytes[..]).unwrap(), snap);
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let mut bytes = b"SQGX".to_vec();
        bytes.extend_from_slice(&[0; 24]);
        assert!(matches!(
            read_snapshot(&bytes[..]),
            Err(SnapshotError::BadMagic(_))
        ));
        let mut bytes = b"SQGF".to_vec();
        bytes.extend_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            read_snapshot(&bytes[..]),
            Err(SnapshotError::UnsupportedVersion(7))
        ));
    }

    #[test]
    fn truncated_payload_is_an_io_error() {
        let g = Grid::new(16).unwrap();
        let snap = Snapshot {
            gamma: 0.5,
            time: 0.0,
            field: ScalarField::zeros(g),
        };
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &snap).unwrap();
        bytes.truncate(100);
        assert!(matches!(
            read_snapshot(&bytes[..]),
            Err(SnapshotError::Io(_))
        ));
    }
}
