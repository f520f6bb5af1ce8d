//! Simulation, screening, and reconstruction for optical diffraction
//! tomography under the first-order (Rytov) scattering approximation.
//!
//! The crate covers the full quality-control loop for angle-scanned
//! holographic measurements:
//!
//! 1. [`sim`] builds refractive-index phantoms, simulates the complex field
//!    each illumination angle produces on the detector, synthesizes off-axis
//!    holograms, and injects the two defect classes seen in practice
//!    (parasitic fringes, broken phase regions) to produce labeled corpora.
//! 2. [`retrieval`] recovers complex fields from off-axis holograms and
//!    unwraps phase maps.
//! 3. [`rule`] scores fields by their worst out-of-band spectral peak, the
//!    classical screening heuristic.
//! 4. [`net`] trains a small convolutional classifier on phase maps and
//!    evaluates screening quality.
//! 5. [`saliency`] explains classifier decisions with class-activation and
//!    guided-backpropagation maps.
//! 6. [`recon`] maps fields onto the scattering potential's spectrum along
//!    Ewald-sphere caps and inverts to a 3-D refractive-index volume.
//!
//! [`field`] holds the shared numeric substrate (rasters, unitary FFTs,
//! phase wrapping) and the binary formats everything else speaks.

pub mod error;
pub mod ewald;
pub mod field;
pub mod net;
pub mod recon;
pub mod retrieval;
pub mod rule;
pub mod saliency;
pub mod seed;
pub mod sim;

pub use error::{OdtError, Result};
pub use field::{ComplexField2D, PhaseImage, Spectrum2D};
