//! Off-axis hologram synthesis.
//!
//! An interferometer mixes the sample beam u with a tilted plane-wave
//! reference R·e^{iq·r}; the camera records the intensity
//!
//! ```text
//!   I(r) = |u(r) + R·e^{iq·r}|²
//!        = |u|² + R² + R·u·e^{−iq·r} + R·u*·e^{iq·r}.
//! ```
//!
//! The tilt q shifts the two cross terms to ±q in the spectrum, away from
//! the baseband |u|² + R² cluster, which is what lets retrieval recover the
//! complex field from a single real image. The carrier must stay at or below
//! two thirds of the grid Nyquist frequency so the sideband (up to one third
//! of Nyquist wide) never aliases into its mirror.

use num_complex::Complex64;

use crate::error::{OdtError, Result};
use crate::field::{ComplexField2D, PhaseImage};

/// Records the interference of `field` with a tilted plane-wave reference.
///
/// `carrier` is the reference tilt in radians per micrometer; coordinates
/// run from the pixel-index origin, `r = (ix·Δ, iy·Δ)`.
pub fn synthesize_hologram(
    field: &ComplexField2D,
    carrier: [f64; 2],
    ref_amplitude: f64,
) -> Result<PhaseImage> {
    let nyquist = std::f64::consts::PI / field.pixel_pitch();
    let q = (carrier[0] * carrier[0] + carrier[1] * carrier[1]).sqrt();
    if !q.is_finite() || q > 2.0 / 3.0 * nyquist {
        return Err(OdtError::validation(format!(
            "carrier magnitude {q} exceeds 2/3 of the Nyquist frequency {nyquist}"
        )));
    }
    if !ref_amplitude.is_finite() || ref_amplitude < 0.0 {
        return Err(OdtError::validation(format!(
            "reference amplitude must be finite and nonnegative, got {ref_amplitude}"
        )));
    }
    let (w, h, pitch) = (field.width(), field.height(), field.pixel_pitch());
    let mut intensity = Vec::with_capacity(w * h);
    for iy in 0..h {
        let y = iy as f64 * pitch;
        for ix in 0..w {
            let x = ix as f64 * pitch;
            let reference = Complex64::from_polar(ref_amplitude, carrier[0] * x + carrier[1] * y);
            intensity.push((field.at(ix, iy) + reference).norm_sqr());
        }
    }
    PhaseImage::new(w, h, intensity)
}
