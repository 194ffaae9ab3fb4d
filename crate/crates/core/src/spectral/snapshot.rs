//! Binary snapshot files.
//!
//! Layout (little-endian): magic `DRHE`, format version `u32`, `d u32`,
//! `N u32`, time `f64`, then `N^d * d` complex coefficients as `(re, im)`
//! `f64` pairs. Wavenumbers run row-major from `-N/2` to `N/2 - 1` along each
//! axis (axis 0 slowest) and velocity components are innermost.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex64;

use super::field::SpectralVelocity;
use super::grid::TorusGrid;
use crate::error::{Error, Result};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"DRHE";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Spectral indices in file order.
fn file_order(grid: &TorusGrid) -> Vec<usize> {
    let n = grid.n() as i64;
    let d = grid.dim();
    let total = grid.len();
    (0..total)
        .map(|pos| {
            let mut k = [0i64; 3];
            let mut rest = pos as i64;
            for a in (0..d).rev() {
                k[a] = rest % n - n / 2;
                rest /= n;
            }
            grid.index_of(k).expect("every wavenumber in range")
        })
        .collect()
}

pub fn encode_snapshot(v: &SpectralVelocity) -> Vec<u8> {
    let grid = &v.grid;
    let mut out = Vec::with_capacity(24 + 16 * grid.len() * grid.dim());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&v.time.to_le_bytes());
    for idx in file_order(grid) {
        for c in &v.coeffs {
            out.extend_from_slice(&c[idx].re.to_le_bytes());
            out.extend_from_slice(&c[idx].im.to_le_bytes());
        }
    }
    out
}

pub fn write_snapshot(path: &Path, v: &SpectralVelocity) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_snapshot(v))?;
    w.flush()?;
    Ok(())
}

fn bad(message: &str) -> Error {
    Error::Parse {
        line: 0,
        message: message.to_string(),
    }
}

/// Decodes a snapshot onto a grid with the given `dealias_fraction`. Modes
/// outside the band are dropped; the rest must describe a real,
/// divergence-free field.
pub fn decode_snapshot(bytes: &[u8], dealias_fraction: f64) -> Result<SpectralVelocity> {
    if bytes.len() < 24 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file (bad magic)"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported snapshot version {version}")));
    }
    let d = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let time = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let grid = TorusGrid::new(d, n, dealias_fraction)?;
    let expected = 24 + 16 * grid.len() * d;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "snapshot payload has {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut v = SpectralVelocity::zeros(&grid);
    v.time = time;
    let mut off = 24;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
    for idx in file_order(&grid) {
        for c in 0..d {
            v.coeffs[c][idx] = Complex64::new(f64_at(off), f64_at(off + 8));
            off += 16;
        }
    }
    if !v.is_finite() {
        return Err(bad("snapshot holds non-finite coefficients"));
    }
    for idx in 0..grid.len() {
        if !grid.retained(idx) {
            for c in v.coeffs.iter_mut() {
                c[idx] = Complex64::new(0.0, 0.0);
            }
        }
    }
    let scale = v.coeffs.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    if v.max_divergence() > 1e-12 || v.hermitian_defect() > 1e-12 * scale {
        return Err(Error::Input("snapshot is not a real divergence-free field".into()));
    }
    Ok(v)
}

pub fn read_snapshot(path: &Path, dealias_fraction: f64) -> Result<SpectralVelocity> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_snapshot(&bytes, dealias_fraction)
}
