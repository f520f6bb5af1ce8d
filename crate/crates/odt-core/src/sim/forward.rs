//! First-order (Rytov) forward model: refractive-index volume in,
//! background-normalized complex field per illumination angle out.
//!
//! The field at the detector is written u = exp(ψ) with a complex Rytov
//! exponent ψ. To first order in the scattering potential
//!
//! ```text
//!   V(r) = (2π/λ)²·(n(r)² − n_m²),
//! ```
//!
//! each transverse frequency of ψ reads one Ewald-cap sample of the 3-D
//! potential spectrum (see [`crate::ewald`]). The simulation is therefore
//! three steps: one unitary 3-D FFT of V, a cap lookup per angle, and one
//! unitary 2-D inverse FFT followed by a pointwise exp. The 3-D spectrum is
//! cached in [`PhantomSpectrum`] so a 71-angle scan pays for the volume
//! transform once.
//!
//! Normalization means the incident carrier is already divided out: a volume
//! with n ≡ n_m yields u ≡ 1 exactly, at every angle.

use num_complex::Complex64;

use crate::error::{OdtError, Result};
use crate::ewald::cap_geometry;
use crate::field::{fft2_inverse, fft3_centered, ComplexField2D, Spectrum2D, TAU};
use crate::sim::{OpticsConfig, RIVolume, VolumeDims, WaveVector};

/// Cached unitary 3-D spectrum of the scattering potential.
#[derive(Debug, Clone)]
pub struct PhantomSpectrum {
    dims: VolumeDims,
    values: Vec<Complex64>,
}

impl PhantomSpectrum {
    pub fn dims(&self) -> VolumeDims {
        self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

/// Transforms a refractive-index map into the potential spectrum V̂.
///
/// The volume must carry the same immersion medium as the optics; a mismatch
/// would silently bake the wrong background into every simulated field.
pub fn potential_spectrum(volume: &RIVolume, optics: &OpticsConfig) -> Result<PhantomSpectrum> {
    optics.validate()?;
    if (volume.n_medium() - optics.n_medium).abs() > 1e-12 {
        return Err(OdtError::validation(format!(
            "volume medium {} does not match optics medium {}",
            volume.n_medium(),
            optics.n_medium
        )));
    }
    let dims = volume.dims();
    let k0 = TAU / optics.wavelength;
    let nm_sq = volume.n_medium() * volume.n_medium();
    let mut values: Vec<Complex64> = volume
        .values()
        .iter()
        .map(|&n| Complex64::new(k0 * k0 * (n * n - nm_sq), 0.0))
        .collect();
    fft3_centered(&mut values, dims.nx, dims.ny, dims.nz, false);
    Ok(PhantomSpectrum { dims, values })
}

/// Simulates the normalized detector field for one illumination angle from a
/// precomputed potential spectrum.
pub fn simulate_field_from_spectrum(
    spectrum: &PhantomSpectrum,
    optics: &OpticsConfig,
    k_in: &WaveVector,
) -> Result<ComplexField2D> {
    let cap = cap_geometry(optics, spectrum.dims, k_in)?;
    let n = optics.detector_pixels;
    let mut bins = vec![Complex64::new(0.0, 0.0); n * n];
    for s in &cap.samples {
        // ψ̂(p) = i·scale/kz_s · V̂(K); the i/kz factor is the free-space
        // propagator weight of the scattered spherical wave, and the sample
        // sign refocuses the axial carrier onto the volume mid-plane.
        bins[s.bin] =
            Complex64::new(0.0, s.sign * cap.scale / s.kz_scatter) * spectrum.values[s.voxel];
    }
    let dk = optics.freq_pitch();
    let exponent = fft2_inverse(&Spectrum2D::from_parts(n, n, dk, dk, bins));
    let mut field = exponent;
    for v in field.values_mut() {
        *v = v.exp();
    }
    Ok(field)
}

/// Convenience wrapper: volume in, one normalized field out.
pub fn simulate_field(
    volume: &RIVolume,
    optics: &OpticsConfig,
    k_in: &WaveVector,
) -> Result<ComplexField2D> {
    let spectrum = potential_spectrum(volume, optics)?;
    simulate_field_from_spectrum(&spectrum, optics, k_in)
}
