//! Refractive-index volumes and their on-disk format.
//!
//! `RIV1`: magic `RIV1`, u32 LE nx, ny, nz, f64 LE voxel pitch, f64 LE
//! medium index, then nx*ny*nz f64 LE voxel values ordered z-major
//! (`values[(z·ny + y)·nx + x]`, z slowest).

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{OdtError, Result};
use crate::field::PhaseImage;

const VOLUME_MAGIC: &[u8; 4] = b"RIV1";

/// Grid geometry of a reconstruction volume. The transverse axes always
/// match the detector grid; the axial extent is the caller's choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_pitch: f64,
}

impl VolumeDims {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (n, axis) in [(self.nx, "nx"), (self.ny, "ny"), (self.nz, "nz")] {
            if n == 0 || !n.is_power_of_two() {
                return Err(OdtError::validation(format!(
                    "volume {axis} must be a power of two, got {n}"
                )));
            }
        }
        if !(self.voxel_pitch > 0.0) || !self.voxel_pitch.is_finite() {
            return Err(OdtError::validation("voxel_pitch must be positive"));
        }
        Ok(())
    }

    /// Voxel-center coordinate along an axis of length `n`, centered so that
    /// index n/2 sits at 0. Matches the detector pixel convention, which
    /// keeps volume columns and field pixels aligned.
    #[inline]
    pub fn coord(&self, index: usize, n: usize) -> f64 {
        (index as f64 - (n / 2) as f64) * self.voxel_pitch
    }
}

/// Real refractive-index map on a z-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RIVolume {
    dims: VolumeDims,
    n_medium: f64,
    values: Vec<f64>,
}

impl RIVolume {
    pub fn new(dims: VolumeDims, n_medium: f64, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if !(n_medium >= 1.0) || !n_medium.is_finite() {
            return Err(OdtError::validation("n_medium must be at least 1"));
        }
        if values.len() != dims.len() {
            return Err(OdtError::validation(format!(
                "volume payload has {} voxels, expected {}",
                values.len(),
                dims.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite() || *v < 1.0) {
            return Err(OdtError::validation(format!(
                "voxel {bad} is {} (refractive index must be finite and >= 1)",
                values[bad]
            )));
        }
        Ok(Self { dims, n_medium, values })
    }

    /// Homogeneous volume at the medium index.
    pub fn uniform(dims: VolumeDims, n_medium: f64) -> Result<Self> {
        let len = dims.len();
        Self::new(dims, n_medium, vec![n_medium; len])
    }

    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn n_medium(&self) -> f64 {
        self.n_medium
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[(z * self.dims.ny + y) * self.dims.nx + x]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, z: usize) -> &mut f64 {
        &mut self.values[(z * self.dims.ny + y) * self.dims.nx + x]
    }

    /// Transverse slice at depth `z`, for inspection exports.
    pub fn slice_z(&self, z: usize) -> Result<PhaseImage> {
        if z >= self.dims.nz {
            return Err(OdtError::validation(format!(
                "slice {z} out of range, volume has {} planes",
                self.dims.nz
            )));
        }
        let plane = self.dims.nx * self.dims.ny;
        PhaseImage::new(
            self.dims.nx,
            self.dims.ny,
            self.values[z * plane..(z + 1) * plane].to_vec(),
        )
    }
}

/// Writes a volume as RIV1.
pub fn write_volume(path: impl AsRef<Path>, volume: &RIVolume) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| OdtError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| OdtError::io(path, e);
    let d = volume.dims();
    out.write_all(VOLUME_MAGIC).map_err(io)?;
    out.write_all(&(d.nx as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(d.ny as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(d.nz as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&d.voxel_pitch.to_le_bytes()).map_err(io)?;
    out.write_all(&volume.n_medium().to_le_bytes()).map_err(io)?;
    for v in volume.values() {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads an RIV1 volume.
pub fn read_volume(path: impl AsRef<Path>) -> Result<RIVolume> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| OdtError::io(path, e))?;

    let header = 4 + 3 * 4 + 2 * 8;
    if bytes.len() < header {
        return Err(OdtError::format(path, "truncated header"));
    }
    if &bytes[0..4] != VOLUME_MAGIC {
        return Err(OdtError::format(
            path,
            format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4])),
        ));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let nx = u32_at(4);
    let ny = u32_at(8);
    let nz = u32_at(12);
    let voxel_pitch = f64_at(16);
    let n_medium = f64_at(24);
    let count = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(nz))
        .ok_or_else(|| OdtError::format(path, "header dimensions overflow"))?;
    let payload = &bytes[header..];
    if payload.len() != count * 8 {
        return Err(OdtError::format(
            path,
            format!(
                "payload is {} bytes, header promises {count} voxels ({} bytes)",
                payload.len(),
                count * 8
            ),
        ));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RIVolume::new(VolumeDims { nx, ny, nz, voxel_pitch }, n_medium, values)
        .map_err(|e| OdtError::format(path, e.to_string()))
}
