//! Forward simulation of angle-scanned holographic measurements.
//!
//! The model is first-order (Rytov) scattering: a phantom's refractive-index
//! contrast becomes a scattering potential, one illumination plane wave per
//! angle samples a cap of that potential's 3-D spectrum (an Ewald-sphere
//! cap clipped by the detection pupil), and the inverse 2-D transform of the
//! sampled cap is the complex exponent of the background-normalized field on
//! the detector. On top of the ideal fields the module synthesizes off-axis
//! holograms and injects the two measurement-defect classes worth screening
//! for: additive parasitic fringes and broken-phase regions.
//!
//! [`dataset`] drives all of it to produce labeled corpora with reproducible
//! per-record seeding.

pub mod dataset;
mod forward;
mod hologram;
mod illumination;
mod noise;
mod phantom;
mod volume;

pub use dataset::{generate_dataset, read_manifest, write_manifest, DatasetConfig, FieldRecord, Label, NoiseKind, Split};
pub use forward::{potential_spectrum, simulate_field, simulate_field_from_spectrum, PhantomSpectrum};
pub use hologram::synthesize_hologram;
pub use illumination::illumination_set;
pub use noise::{inject_broken_phase, inject_fringe_noise};
pub use phantom::{make_phantom, PhantomKind, PhantomSpec};
pub use volume::{read_volume, write_volume, RIVolume, VolumeDims};

use serde::{Deserialize, Serialize};

use crate::error::{OdtError, Result};
use crate::field::TAU;

/// Imaging geometry and scan plan. Lengths in micrometers, numerical
/// apertures dimensionless, frequencies derived in radians per micrometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticsConfig {
    /// Vacuum wavelength.
    pub wavelength: f64,
    /// Immersion-medium refractive index.
    pub n_medium: f64,
    /// Detection-side numerical aperture.
    pub na_detection: f64,
    /// Illumination-cone numerical aperture.
    pub na_illumination: f64,
    /// Detector pixel spacing at the sample plane.
    pub pixel_pitch: f64,
    /// Detector side length in pixels (square grid, power of two).
    pub detector_pixels: usize,
    /// Scan length: one normal-incidence angle plus a circle of tilts.
    pub num_angles: usize,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            wavelength: 0.532,
            n_medium: 1.337,
            na_detection: 0.8,
            na_illumination: 0.7,
            pixel_pitch: 0.16,
            detector_pixels: 256,
            num_angles: 71,
        }
    }
}

impl OpticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) || !self.wavelength.is_finite() {
            return Err(OdtError::validation("wavelength must be positive"));
        }
        if !(self.n_medium >= 1.0) || !self.n_medium.is_finite() {
            return Err(OdtError::validation("n_medium must be at least 1"));
        }
        if !(self.na_illumination > 0.0) {
            return Err(OdtError::validation("na_illumination must be positive"));
        }
        if self.na_illumination > self.na_detection {
            return Err(OdtError::validation(
                "na_illumination must not exceed na_detection",
            ));
        }
        // NA < n keeps every transverse frequency inside the Ewald sphere,
        // so axial wave components stay real.
        if !(self.na_detection < self.n_medium) {
            return Err(OdtError::validation(
                "na_detection must be below n_medium",
            ));
        }
        if !(self.pixel_pitch > 0.0) || !self.pixel_pitch.is_finite() {
            return Err(OdtError::validation("pixel_pitch must be positive"));
        }
        if self.detector_pixels == 0 || !self.detector_pixels.is_power_of_two() {
            return Err(OdtError::validation(
                "detector_pixels must be a power of two",
            ));
        }
        if self.num_angles == 0 {
            return Err(OdtError::validation("num_angles must be at least 1"));
        }
        Ok(())
    }

    /// Wavenumber in the immersion medium, 2π·n/λ.
    pub fn k_medium(&self) -> f64 {
        TAU * self.n_medium / self.wavelength
    }

    /// Detection pupil radius in transverse frequency, 2π·NA_det/λ.
    pub fn pupil_radius(&self) -> f64 {
        TAU * self.na_detection / self.wavelength
    }

    /// Illumination-cone transverse frequency, 2π·NA_ill/λ.
    pub fn illumination_radius(&self) -> f64 {
        TAU * self.na_illumination / self.wavelength
    }

    /// One-sided frequency bound of the detector grid, π/pitch.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.pixel_pitch
    }

    /// Frequency step of the detector grid, 2π/(n·pitch).
    pub fn freq_pitch(&self) -> f64 {
        TAU / (self.detector_pixels as f64 * self.pixel_pitch)
    }

    /// Cubic-by-default reconstruction grid matched to the detector.
    pub fn volume_dims(&self, nz: usize) -> VolumeDims {
        VolumeDims {
            nx: self.detector_pixels,
            ny: self.detector_pixels,
            nz,
            voxel_pitch: self.pixel_pitch,
        }
    }
}

/// Illumination plane-wave vector in the medium, radians per micrometer.
/// Propagates toward positive z; the norm is always 2π·n_medium/λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
}

impl WaveVector {
    pub fn new(kx: f64, ky: f64, kz: f64) -> Result<Self> {
        if !(kz > 0.0) {
            return Err(OdtError::validation(format!(
                "wave vector must propagate toward +z, got kz = {kz}"
            )));
        }
        if !(kx.is_finite() && ky.is_finite() && kz.is_finite()) {
            return Err(OdtError::validation("wave vector components must be finite"));
        }
        Ok(Self { kx, ky, kz })
    }

    pub fn norm(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky + self.kz * self.kz).sqrt()
    }

    /// Transverse magnitude, the carrier frequency this angle imprints.
    pub fn transverse(&self) -> f64 {
        (self.kx * self.kx + self.ky * self.ky).sqrt()
    }
}

impl From<[f64; 3]> for WaveVector {
    fn from(v: [f64; 3]) -> Self {
        Self { kx: v[0], ky: v[1], kz: v[2] }
    }
}

impl From<WaveVector> for [f64; 3] {
    fn from(v: WaveVector) -> [f64; 3] {
        [v.kx, v.ky, v.kz]
    }
}
