//! Illumination scan plan: one normal-incidence wave plus a circle of tilts.

use crate::error::Result;
use crate::field::TAU;

use super::{OpticsConfig, WaveVector};

/// Wave vectors of the angle scan. The first entry is normal incidence; the
/// remaining `num_angles - 1` lie on the illumination cone at equal azimuth
/// steps starting from azimuth zero. Every vector has norm 2π·n_medium/λ and
/// propagates toward +z.
pub fn illumination_set(config: &OpticsConfig) -> Result<Vec<WaveVector>> {
    config.validate()?;
    let km = config.k_medium();
    let mut out = Vec::with_capacity(config.num_angles);
    out.push(WaveVector::new(0.0, 0.0, km)?);

    let ring = config.num_angles - 1;
    if ring > 0 {
        let kt = config.illumination_radius();
        let kz = (km * km - kt * kt).sqrt();
        for j in 0..ring {
            let az = TAU * j as f64 / ring as f64;
            out.push(WaveVector::new(kt * az.cos(), kt * az.sin(), kz)?);
        }
    }
    Ok(out)
}
