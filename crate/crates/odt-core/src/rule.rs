//! Rule-based field screening from the out-of-band spectral peak.
//!
//! A background-normalized clean field concentrates its spectrum inside the
//! detection band around the illumination carrier. Parasitic fringes — stray
//! reflections, a second reference echo — are nearly monochromatic, so they
//! rise as isolated lines far outside that band where a clean field has
//! nothing. The screen masks a disk around the carrier, takes the peak
//! log10-magnitude over everything outside the disk, and calls the field
//! noisy when that peak clears a threshold.
//!
//! The decision direction matters: a HIGH out-of-band peak means
//! contamination. Broken-phase defects barely move the peak — their energy
//! hides inside the passband — which is exactly the blind spot that
//! motivates the learned classifier.

use crate::error::{OdtError, Result};
use crate::field::{fft2_forward, ComplexField2D};
use crate::sim::{Label, OpticsConfig};

/// Heuristic threshold carried over from manual tuning on microscope data;
/// synthetic corpora should prefer [`calibrate_threshold`].
pub const PRESET_THRESHOLD: f64 = 3.306;

/// Additive floor inside the log, guarding empty bins.
pub const SPECTRUM_FLOOR: f64 = 1e-12;

/// Geometry and decision threshold of the spectral screen.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleConfig {
    /// Radius of the masked (ignored) disk, radians per micrometer.
    pub mask_radius: f64,
    /// Disk center: the transverse illumination frequency. Zero for
    /// background-normalized fields, whose carrier sits at DC.
    pub mask_center: [f64; 2],
    /// Decision level on the log10 peak; strictly above means noisy.
    pub threshold: f64,
}

impl RuleConfig {
    /// Default geometry for an imaging setup: mask half the detection pupil
    /// around the given carrier, decide at the preset threshold.
    pub fn for_optics(optics: &OpticsConfig, carrier: [f64; 2]) -> Self {
        Self {
            mask_radius: 0.5 * optics.pupil_radius(),
            mask_center: carrier,
            threshold: PRESET_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mask_radius > 0.0) || !self.mask_radius.is_finite() {
            return Err(OdtError::validation(format!(
                "mask_radius must be positive and finite, got {}",
                self.mask_radius
            )));
        }
        if !self.mask_center[0].is_finite() || !self.mask_center[1].is_finite() {
            return Err(OdtError::validation("mask_center must be finite"));
        }
        if !self.threshold.is_finite() {
            return Err(OdtError::validation("threshold must be finite"));
        }
        Ok(())
    }
}

/// Peak log10-magnitude of the field's spectrum outside the mask disk.
pub fn rule_score(field: &ComplexField2D, config: &RuleConfig) -> Result<f64> {
    config.validate()?;
    let spectrum = fft2_forward(field);
    let r2 = config.mask_radius * config.mask_radius;
    let mut peak = f64::NEG_INFINITY;
    let mut scanned = 0usize;
    for iy in 0..spectrum.height() {
        let dy = spectrum.freq_y(iy) - config.mask_center[1];
        for ix in 0..spectrum.width() {
            let dx = spectrum.freq_x(ix) - config.mask_center[0];
            if dx * dx + dy * dy > r2 {
                let level = (spectrum.at(ix, iy).norm() + SPECTRUM_FLOOR).log10();
                if level > peak {
                    peak = level;
                }
                scanned += 1;
            }
        }
    }
    if scanned == 0 {
        return Err(OdtError::validation(format!(
            "mask radius {} covers the whole {}x{} spectrum: nothing to score",
            config.mask_radius,
            spectrum.width(),
            spectrum.height()
        )));
    }
    Ok(peak)
}

/// Thresholded decision: noisy iff the score strictly exceeds the threshold.
pub fn rule_classify(field: &ComplexField2D, config: &RuleConfig) -> Result<Label> {
    let score = rule_score(field, config)?;
    Ok(if score > config.threshold { Label::Noisy } else { Label::Clean })
}

/// Picks the threshold maximizing balanced accuracy — the mean of the clean
/// keep-rate and the noisy catch-rate — over labeled scores. Candidates are
/// the midpoints between adjacent distinct scores plus the two all-one-class
/// extremes; ties go to the lowest threshold, which is deterministic.
pub fn calibrate_threshold(scores: &[(f64, Label)]) -> Result<f64> {
    let n_noisy = scores.iter().filter(|(_, l)| *l == Label::Noisy).count();
    let n_clean = scores.len() - n_noisy;
    if n_noisy == 0 || n_clean == 0 {
        return Err(OdtError::validation(format!(
            "calibration needs both classes, got {n_clean} clean and {n_noisy} noisy"
        )));
    }
    if scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(OdtError::validation("calibration scores must be finite"));
    }

    let mut sorted: Vec<f64> = scores.iter().map(|(s, _)| *s).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
    sorted.dedup();
    let mut candidates = Vec::with_capacity(sorted.len() + 1);
    candidates.push(sorted[0] - 1.0); // everything noisy
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(sorted[sorted.len() - 1]); // everything clean

    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &t in &candidates {
        let caught = scores.iter().filter(|(s, l)| *l == Label::Noisy && *s > t).count();
        let kept = scores.iter().filter(|(s, l)| *l == Label::Clean && *s <= t).count();
        let balanced =
            0.5 * (caught as f64 / n_noisy as f64 + kept as f64 / n_clean as f64);
        if balanced > best.0 {
            best = (balanced, t);
        }
    }
    Ok(best.1)
}
