//! Measurement-defect injection for retrieved fields.
//!
//! Two defect classes are modeled, matching what angle-scanned holographic
//! systems actually produce:
//!
//! * **Parasitic fringes** — a stray reflection or spurious diffraction
//!   order reaches the camera and survives demodulation as an additive
//!   plane-wave term on the retrieved field. The fringe is fully described
//!   by (amplitude, transverse frequency, phase) and is deterministic.
//! * **Broken phase** — when the interferogram degrades, demodulated phase
//!   decorrelates over whole regions and the unwrapper propagates garbage.
//!   The signature on the complex field is a contiguous region whose phase
//!   is uniform noise and whose amplitude collapses; the region shape is a
//!   seeded random smooth blob thresholded at an exact pixel quota.
//!
//! Both operations return new fields; amplitude zero or region fraction zero
//! are exact identities.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{OdtError, Result};
use crate::field::{ComplexField2D, TAU};
use crate::seed::derive_rng;

/// Adds a plane-wave fringe `a·exp(i(q·r + φ₀))` to the field.
///
/// Coordinates use the pixel-index origin, matching
/// [`synthesize_hologram`](crate::sim::synthesize_hologram).
pub fn inject_fringe_noise(
    field: &ComplexField2D,
    amplitude: f64,
    freq: [f64; 2],
    phase: f64,
) -> Result<ComplexField2D> {
    if !amplitude.is_finite() || !(0.0..=2.0).contains(&amplitude) {
        return Err(OdtError::validation(format!(
            "fringe amplitude must lie in [0, 2], got {amplitude}"
        )));
    }
    if !freq[0].is_finite() || !freq[1].is_finite() || !phase.is_finite() {
        return Err(OdtError::validation("fringe frequency and phase must be finite"));
    }
    if amplitude == 0.0 {
        return Ok(field.clone());
    }
    let mut out = field.clone();
    let (w, h, pitch) = (field.width(), field.height(), field.pixel_pitch());
    for iy in 0..h {
        let y = iy as f64 * pitch;
        for ix in 0..w {
            let x = ix as f64 * pitch;
            *out.at_mut(ix, iy) +=
                Complex64::from_polar(amplitude, freq[0] * x + freq[1] * y + phase);
        }
    }
    Ok(out)
}

/// Replaces a seeded random region with unwrap-failure debris: uniform
/// random phase per pixel and a single amplitude collapse factor drawn from
/// [0, 0.2). Returns the corrupted field and the number of affected pixels,
/// which is exactly `round(fraction · pixels)`.
pub fn inject_broken_phase(
    field: &ComplexField2D,
    fraction: f64,
    seed: u64,
) -> Result<(ComplexField2D, usize)> {
    if !fraction.is_finite() || !(0.0..=1.0).contains(&fraction) {
        return Err(OdtError::validation(format!(
            "broken fraction must lie in [0, 1], got {fraction}"
        )));
    }
    if fraction == 0.0 {
        return Ok((field.clone(), 0));
    }
    let (w, h) = (field.width(), field.height());
    let total = w * h;
    let quota = (fraction * total as f64).round() as usize;
    let mut rng = derive_rng(seed, &[0x6272_6f6b_656e]);

    // Smooth random scalar field: three cosine waves with random direction,
    // scale, and phase. Thresholding its upper quantile yields a contiguous
    // blob (or a half-plane-like band for low frequencies) of exactly the
    // requested size.
    let mut waves = [(0.0f64, 0.0f64, 0.0f64, 0.0f64); 3];
    for wave in &mut waves {
        let azimuth = TAU * rng.random::<f64>();
        let cycles = 0.5 + 2.5 * rng.random::<f64>();
        let phase = TAU * rng.random::<f64>();
        let weight = 0.5 + 0.5 * rng.random::<f64>();
        let k = TAU * cycles;
        *wave = (k * azimuth.cos() / w as f64, k * azimuth.sin() / h as f64, phase, weight);
    }
    let amp_factor = 0.2 * rng.random::<f64>();

    let mut landscape = Vec::with_capacity(total);
    for iy in 0..h {
        for ix in 0..w {
            let mut g = 0.0;
            for &(kx, ky, p, c) in &waves {
                g += c * (kx * ix as f64 + ky * iy as f64 + p).cos();
            }
            landscape.push(g);
        }
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        landscape[b].partial_cmp(&landscape[a]).unwrap().then(a.cmp(&b))
    });
    let mut mask = vec![false; total];
    for &i in order.iter().take(quota) {
        mask[i] = true;
    }

    let mut out = field.clone();
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        if mask[i] {
            let phase = std::f64::consts::PI - TAU * rng.random::<f64>();
            *v = Complex64::from_polar(v.norm() * amp_factor, phase);
        }
    }
    Ok((out, quota))
}
