//! `VFLD1` field files: magic `VFLD1`, then little-endian `u32` version,
//! `N`, `m`, `M`, `f64` `L`, then `m·M^N` `f64` samples, component-major and
//! row-major within a component.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{Grid, ScalarField};

pub const MAGIC: &[u8; 5] = b"VFLD1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 5 + 4 * 4 + 8;

pub fn encode(u: &VectorField) -> Vec<u8> {
    let grid = u.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * u.m() * grid.total_points());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, grid.dim() as u32, u.m() as u32, grid.points() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&grid.half_length().to_le_bytes());
    for comp in u.components() {
        for v in comp.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<VectorField> {
    if bytes.len() < HEADER_LEN || &bytes[..5] != MAGIC {
        return Err(Error::Format("missing VFLD1 header".into()));
    }
    let word = |k: usize| {
        let at = 5 + 4 * k;
        u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
    };
    let (version, dim, m, points) = (word(0), word(1) as usize, word(2) as usize, word(3) as usize);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let half_length = f64::from_le_bytes(bytes[21..29].try_into().expect("8 bytes"));
    let grid = Grid::new(dim, points, half_length).map_err(|e| Error::Format(e.to_string()))?;
    if m == 0 {
        return Err(Error::Format("field has no components".into()));
    }
    let n = grid.total_points();
    let expected = HEADER_LEN + 8 * m * n;
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut components = Vec::with_capacity(m);
    for i in 0..m {
        let start = HEADER_LEN + 8 * i * n;
        let values: Vec<f64> = bytes[start..start + 8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        components.push(ScalarField::new(grid.clone(), values).map_err(|e| Error::Format(e.to_string()))?);
    }
    VectorField::new(components)
}

pub fn write(path: &Path, u: &VectorField) -> Result<()> {
    super::write_atomic(path, &encode(u))
}

pub fn read(path: &Path) -> Result<VectorField> {
    decode(&std::fs::read(path)?)
}
