//! Synthetic specimens: index contrast carved into a homogeneous medium.

use crate::error::{OdtError, Result};

use super::volume::{RIVolume, VolumeDims};

/// Inclusion geometry. Lengths in micrometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhantomKind {
    /// Homogeneous sphere.
    Bead { radius: f64 },
    /// Capsule: a cylinder with hemispherical caps, the usual stand-in for
    /// rod-shaped bacteria. `length` is tip to tip along the axis, which
    /// lies in the xy-plane rotated by `azimuth` radians from +x.
    Rod { length: f64, radius: f64, azimuth: f64 },
}

/// One inclusion: geometry, index contrast over the medium, and center
/// offset from the volume center in micrometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub delta_n: f64,
    pub offset: [f64; 3],
}

impl PhantomSpec {
    pub fn bead(radius: f64, delta_n: f64, offset: [f64; 3]) -> Self {
        Self { kind: PhantomKind::Bead { radius }, delta_n, offset }
    }

    pub fn rod(length: f64, radius: f64, azimuth: f64, delta_n: f64, offset: [f64; 3]) -> Self {
        Self { kind: PhantomKind::Rod { length, radius, azimuth }, delta_n, offset }
    }

    fn validate(&self) -> Result<()> {
        // First-order scattering stops being a faithful model well before
        // Δn = 0.1 at cell-scale thicknesses; reject anything beyond it.
        if !(self.delta_n > 0.0 && self.delta_n <= 0.1) {
            return Err(OdtError::validation(format!(
                "delta_n must be in (0, 0.1], got {}",
                self.delta_n
            )));
        }
        let radius = match self.kind {
            PhantomKind::Bead { radius } => radius,
            PhantomKind::Rod { length, radius, .. } => {
                if !(length > 0.0) || length < 2.0 * radius {
                    return Err(OdtError::validation(format!(
                        "rod length {} must cover its two end caps (>= 2·radius)",
                        length
                    )));
                }
                radius
            }
        };
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(OdtError::validation("phantom radius must be positive"));
        }
        if self.offset.iter().any(|v| !v.is_finite()) {
            return Err(OdtError::validation("phantom offset must be finite"));
        }
        Ok(())
    }

    /// True if the point (relative to the inclusion center) is inside.
    fn contains(&self, dx: f64, dy: f64, dz: f64) -> bool {
        match self.kind {
            PhantomKind::Bead { radius } => dx * dx + dy * dy + dz * dz <= radius * radius,
            PhantomKind::Rod { length, radius, azimuth } => {
                // Distance to the axis segment of half-length (L/2 - r).
                let half = length / 2.0 - radius;
                let (c, s) = (azimuth.cos(), azimuth.sin());
                let along = (dx * c + dy * s).clamp(-half, half);
                let px = dx - along * c;
                let py = dy - along * s;
                px * px + py * py + dz * dz <= radius * radius
            }
        }
    }
}

/// Rasterizes inclusions into a volume at `n_medium + delta_n`; voxels are
/// classified by their center point. Overlapping inclusions take the maximum
/// index rather than stacking contrast.
pub fn make_phantom(
    specs: &[PhantomSpec],
    dims: VolumeDims,
    n_medium: f64,
) -> Result<RIVolume> {
    dims.validate()?;
    for spec in specs {
        spec.validate()?;
    }
    let mut volume = RIVolume::uniform(dims, n_medium)?;
    for spec in specs {
        let n_inside = n_medium + spec.delta_n;
        for z in 0..dims.nz {
            let dz = dims.coord(z, dims.nz) - spec.offset[2];
            for y in 0..dims.ny {
                let dy = dims.coord(y, dims.ny) - spec.offset[1];
                for x in 0..dims.nx {
                    let dx = dims.coord(x, dims.nx) - spec.offset[0];
                    if spec.contains(dx, dy, dz) {
                        let v = volume.at_mut(x, y, z);
                        if n_inside > *v {
                            *v = n_inside;
                        }
                    }
                }
            }
        }
    }
    Ok(volume)
}
