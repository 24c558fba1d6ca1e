//! Binary basis cache.
//!
//! Little-endian layout:
//!
//! ```text
//! magic            b"IONB"
//! version          u32 (currently 1)
//! geometry hash    u32 length + utf8 hex string
//! flags            u8 (bit 0: refined region present)
//! coarse meta      nx, ny, nz as u32; spacing f64; origin 3 x f64
//! refined meta     same, if flagged
//! electrode count  u32
//! id table         per electrode: name (u32 len + utf8), group (u32 len +
//!                  utf8), segment u8 (0 = none), solve residual f64
//! payload          per electrode: coarse f64 array + CRC-32, then refined
//!                  f64 array + CRC-32 if flagged
//! ```
//!
//! Loading re-rasterizes the geometry (labels are not stored) and verifies
//! the geometry hash, the grid metadata and every array checksum.

use super::{BasisPotentials, BasisSet, ElectrodeSolveStats, SolveStats, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{LabeledGrid, VoxelDomain};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"IONB";
pub const FORMAT_VERSION: u32 = 1;

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320).
pub fn crc32(data: &[u8]) -> u32 {
    crc32_update(0xFFFF_FFFF, data) ^ 0xFFFF_FFFF
}

const CRC_TABLE: [u32; 256] = {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
};

fn crc32_update(mut state: u32, data: &[u8]) -> u32 {
    for &b in data {
        state = CRC_TABLE[((state ^ b as u32) & 0xFF) as usize] ^ (state >> 8);
    }
    state
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|e| Error::Cache(format!("truncated file: {e}")))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Cache("unreasonable string length".into()));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Cache("invalid utf8 in id table".into()))
}

fn write_grid_meta<W: Write>(w: &mut W, g: &LabeledGrid) -> Result<()> {
    write_u32(w, g.nx as u32)?;
    write_u32(w, g.ny as u32)?;
    write_u32(w, g.nz as u32)?;
    write_f64(w, g.spacing)?;
    for k in 0..3 {
        write_f64(w, g.origin[k])?;
    }
    Ok(())
}

fn check_grid_meta<R: Read>(r: &mut R, g: &LabeledGrid, which: &str) -> Result<()> {
    let nx = read_u32(r)? as usize;
    let ny = read_u32(r)? as usize;
    let nz = read_u32(r)? as usize;
    let spacing = read_f64(r)?;
    let origin = [read_f64(r)?, read_f64(r)?, read_f64(r)?];
    if nx != g.nx || ny != g.ny || nz != g.nz || spacing != g.spacing || origin != g.origin {
        return Err(Error::Cache(format!(
            "{which} grid metadata does not match the rebuilt domain"
        )));
    }
    Ok(())
}

fn write_array<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    let mut crc = 0xFFFF_FFFFu32;
    let mut buf = [0u8; 8 * 4096];
    for chunk in data.chunks(4096) {
        let bytes = &mut buf[..8 * chunk.len()];
        for (i, v) in chunk.iter().enumerate() {
            bytes[8 * i..8 * i + 8].copy_from_slice(&v.to_le_bytes());
        }
        crc = crc32_update(crc, bytes);
        w.write_all(bytes)?;
    }
    write_u32(w, crc ^ 0xFFFF_FFFF)?;
    Ok(())
}

fn read_array<R: Read>(r: &mut R, len: usize, what: &str) -> Result<Vec<f64>> {
    let mut data = Vec::with_capacity(len);
    let mut crc = 0xFFFF_FFFFu32;
    let mut buf = [0u8; 8 * 4096];
    let mut remaining = len;
    while remaining > 0 {
        let take = remaining.min(4096);
        let bytes = &mut buf[..8 * take];
        read_exact(r, bytes)?;
        crc = crc32_update(crc, bytes);
        for i in 0..take {
            let mut b = [0u8; 8];
            b.copy_from_slice(&bytes[8 * i..8 * i + 8]);
            data.push(f64::from_le_bytes(b));
        }
        remaining -= take;
    }
    let stored = read_u32(r)?;
    if stored != crc ^ 0xFFFF_FFFF {
        return Err(Error::Cache(format!("checksum failure in {what}")));
    }
    Ok(data)
}

/// Write a basis set to `path`.
pub fn save_basis(basis: &BasisSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    write_u32(&mut w, FORMAT_VERSION)?;
    write_str(&mut w, &basis.domain.spec_hash)?;
    let has_refined = basis.domain.refined.is_some();
    w.write_all(&[has_refined as u8])?;
    write_grid_meta(&mut w, &basis.domain.coarse)?;
    if let Some(rg) = &basis.domain.refined {
        write_grid_meta(&mut w, rg)?;
    }
    write_u32(&mut w, basis.electrode_count() as u32)?;
    for (e, info) in basis.domain.electrodes.entries.iter().enumerate() {
        write_str(&mut w, &info.name)?;
        write_str(&mut w, &info.group)?;
        w.write_all(&[info.segment.unwrap_or(0)])?;
        write_f64(&mut w, basis.stats[e].worst_residual())?;
    }
    for bp in &basis.per_electrode {
        write_array(&mut w, &bp.coarse)?;
        if has_refined {
            let refined = bp
                .refined
                .as_ref()
                .ok_or_else(|| Error::Cache("missing refined basis array".into()))?;
            write_array(&mut w, refined)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a basis set saved with [`save_basis`], verifying it against a
/// freshly rasterized `domain`.
pub fn load_basis(path: &Path, domain: VoxelDomain) -> Result<BasisSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Cache("bad magic; not a basis cache".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let hash = read_str(&mut r)?;
    if hash != domain.spec_hash {
        return Err(Error::StaleCache {
            file: hash,
            domain: domain.spec_hash,
        });
    }
    let has_refined = read_u8(&mut r)? != 0;
    if has_refined != domain.refined.is_some() {
        return Err(Error::Cache("refined-region flag mismatch".into()));
    }
    check_grid_meta(&mut r, &domain.coarse, "coarse")?;
    if let Some(rg) = &domain.refined {
        check_grid_meta(&mut r, rg, "refined")?;
    }
    let n = read_u32(&mut r)? as usize;
    if n != domain.electrodes.len() {
        return Err(Error::Cache("electrode count mismatch".into()));
    }
    let mut residuals = Vec::with_capacity(n);
    for info in &domain.electrodes.entries {
        let name = read_str(&mut r)?;
        let group = read_str(&mut r)?;
        let segment = read_u8(&mut r)?;
        if name != info.name || group != info.group || segment != info.segment.unwrap_or(0) {
            return Err(Error::Cache(format!(
                "electrode table mismatch at '{}'",
                info.name
            )));
        }
        residuals.push(read_f64(&mut r)?);
    }
    let coarse_len = domain.coarse.len();
    let refined_len = domain.refined.as_ref().map(|g| g.len());
    let mut per_electrode = Vec::with_capacity(n);
    for info in &domain.electrodes.entries {
        let coarse = read_array(&mut r, coarse_len, &format!("{} (coarse)", info.name))?;
        let refined = match refined_len {
            Some(len) => Some(read_array(
                &mut r,
                len,
                &format!("{} (refined)", info.name),
            )?),
            None => None,
        };
        per_electrode.push(BasisPotentials { coarse, refined });
    }
    let stats = residuals
        .into_iter()
        .map(|final_residual| ElectrodeSolveStats {
            coarse: SolveStats {
                sweeps: 0,
                final_residual,
                residual_target: f64::NAN,
                error_target: f64::NAN,
                omega: f64::NAN,
            },
            refined: None,
            derived_from: None,
        })
        .collect();
    Ok(BasisSet {
        domain,
        per_electrode,
        stats,
        options: SolverOptions::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
        assert_eq!(crc32(b""), 0);
    }
}
