//! Sideband demodulation of off-axis holograms.
//!
//! A recorded intensity `I = |u + R·e^{iq·r}|²` splits in the frequency
//! domain into a baseband cluster (`|u|² + R²`, centered on DC) and two
//! cross-term sidebands at ±q. Cropping a disk around the +q sideband,
//! recentering it on DC, and inverse-transforming recovers the complex
//! sample field up to the reference amplitude — one real camera frame turns
//! back into amplitude and phase.
//!
//! Under this crate's `e^{−ik·r}` forward kernel the +q sideband holds
//! `R·u*`, so the demodulated field is conjugated once at the end to return
//! `R·u`. The carrier is snapped to the nearest frequency bin; a sub-bin
//! residual tilt survives as a slow phase ramp, which the background
//! normalization step divides away because reference and sample frames share
//! the same carrier.

use num_complex::Complex64;

use crate::error::{OdtError, Result};
use crate::field::{fft2_forward, fft2_inverse, ComplexField2D, PhaseImage, Spectrum2D};

/// Recovers the complex field whose interference with a tilted reference
/// produced `hologram`.
///
/// `carrier` is the reference tilt in radians per micrometer, `crop_radius`
/// the sideband bandwidth to keep. The crop disk must exclude DC
/// (`crop_radius ≤ |carrier|`) and fit inside the spectrum.
pub fn retrieve_field(
    hologram: &PhaseImage,
    pixel_pitch: f64,
    carrier: [f64; 2],
    crop_radius: f64,
) -> Result<ComplexField2D> {
    if !(pixel_pitch > 0.0) || !pixel_pitch.is_finite() {
        return Err(OdtError::validation(format!(
            "pixel_pitch must be positive and finite, got {pixel_pitch}"
        )));
    }
    let q = carrier[0].hypot(carrier[1]);
    if !q.is_finite() {
        return Err(OdtError::validation("carrier components must be finite"));
    }
    if !(crop_radius > 0.0) || !crop_radius.is_finite() {
        return Err(OdtError::validation(format!(
            "crop_radius must be positive and finite, got {crop_radius}"
        )));
    }
    if crop_radius > q {
        return Err(OdtError::validation(format!(
            "crop_radius {crop_radius} exceeds the carrier magnitude {q}: \
             the sideband disk would reach the baseband at DC"
        )));
    }

    let (w, h) = (hologram.width(), hologram.height());
    let complex: Vec<Complex64> =
        hologram.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spectrum = fft2_forward(&ComplexField2D::new(w, h, pixel_pitch, complex)?);
    let (dkx, dky) = (spectrum.freq_pitch_x(), spectrum.freq_pitch_y());

    // Nearest-bin carrier and the disk's per-axis extent in bins. The disk
    // center lands on a bin, so its reach along each axis is exactly
    // floor(radius / step).
    let sx = (carrier[0] / dkx).round() as i64;
    let sy = (carrier[1] / dky).round() as i64;
    let ex = (crop_radius / dkx).floor() as i64;
    let ey = (crop_radius / dky).floor() as i64;
    let cx = (w / 2) as i64 + sx;
    let cy = (h / 2) as i64 + sy;
    if cx - ex < 0 || cx + ex >= w as i64 || cy - ey < 0 || cy + ey >= h as i64 {
        return Err(OdtError::validation(format!(
            "crop disk of radius {crop_radius} around carrier bin ({sx}, {sy}) \
             leaves the {w}x{h} spectrum"
        )));
    }

    // Move the sideband to DC: output bin (ix, iy) at frequency f takes the
    // source bin at f + q_snapped, zero outside the disk.
    let r2 = crop_radius * crop_radius;
    let mut bins = vec![Complex64::ZERO; w * h];
    for iy in 0..h {
        let fy = spectrum.freq_y(iy);
        for ix in 0..w {
            let fx = spectrum.freq_x(ix);
            if fx * fx + fy * fy <= r2 {
                let jx = (ix as i64 + sx) as usize;
                let jy = (iy as i64 + sy) as usize;
                bins[iy * w + ix] = spectrum.at(jx, jy);
            }
        }
    }
    let demodulated = fft2_inverse(&Spectrum2D::from_parts(w, h, dkx, dky, bins));

    // The +q sideband carries the conjugate field under the e^{−ik·r}
    // kernel; one conjugation restores the sample orientation.
    let values = demodulated.values().iter().map(|v| v.conj()).collect();
    ComplexField2D::new(w, h, pixel_pitch, values)
}
