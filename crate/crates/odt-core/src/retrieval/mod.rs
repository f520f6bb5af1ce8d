//! Field retrieval: from camera frames back to complex optical fields.
//!
//! Off-axis acquisition records a single real intensity image per angle; this
//! module inverts that encoding in three stages. [`retrieve_field`]
//! demodulates the interference sideband into a complex field,
//! [`normalize_background`] divides a sample frame by an empty-sample frame
//! taken with the same reference — cancelling the carrier residual, the
//! reference amplitude, and any fixed system phase in one stroke — and
//! [`unwrap_phase`] turns the wrapped argument into a continuous phase
//! surface ready for quantitative use.

mod demodulate;
mod unwrap;

pub use demodulate::retrieve_field;
pub use unwrap::unwrap_phase;

use crate::error::{OdtError, Result};
use crate::field::ComplexField2D;

/// Smallest background amplitude accepted by [`normalize_background`];
/// pixels dimmer than this would amplify noise unboundedly under division.
pub const MIN_BACKGROUND_AMPLITUDE: f64 = 1e-6;

/// Pointwise division of a sample field by its matching background field.
pub fn normalize_background(
    sample: &ComplexField2D,
    background: &ComplexField2D,
) -> Result<ComplexField2D> {
    if sample.width() != background.width() || sample.height() != background.height() {
        return Err(OdtError::validation(format!(
            "sample is {}x{}, background is {}x{}",
            sample.width(),
            sample.height(),
            background.width(),
            background.height()
        )));
    }
    if sample.pixel_pitch() != background.pixel_pitch() {
        return Err(OdtError::validation(format!(
            "sample pitch {} differs from background pitch {}",
            sample.pixel_pitch(),
            background.pixel_pitch()
        )));
    }
    let w = sample.width();
    let mut out = Vec::with_capacity(sample.values().len());
    for (i, (s, b)) in sample.values().iter().zip(background.values()).enumerate() {
        let amplitude = b.norm();
        if amplitude < MIN_BACKGROUND_AMPLITUDE {
            return Err(OdtError::validation(format!(
                "background amplitude {amplitude:.3e} at pixel ({}, {}) is below {MIN_BACKGROUND_AMPLITUDE:e}",
                i % w,
                i / w
            )));
        }
        out.push(s / b);
    }
    ComplexField2D::new(w, sample.height(), sample.pixel_pitch(), out)
}
