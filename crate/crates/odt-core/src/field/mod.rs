//! Shared raster types for complex optical fields, real-valued images, and
//! DC-centered spectra, plus the small set of pixel-space operations the rest
//! of the pipeline leans on (phase wrapping, symmetric cropping).
//!
//! Conventions, fixed here and relied on everywhere else:
//! - grids are powers of two along each axis and sampled in 64-bit floats;
//! - pixel pitch is in micrometers, spatial frequency in radians per
//!   micrometer;
//! - spectra are DC-centered: bin `(w/2, h/2)` is frequency zero and bin
//!   `(ix, iy)` sits at `((ix - w/2)·Δkx, (iy - h/2)·Δky)` with
//!   `Δk = 2π/(n·pitch)` per axis;
//! - storage is row-major, `values[y*width + x]`.

mod fft;
pub mod io;

pub use fft::{fft2_forward, fft2_inverse, fft3_centered, Fft1D};
pub use io::{read_field, read_image, write_field, write_image};

use num_complex::Complex64;

use crate::error::{OdtError, Result};

pub const TAU: f64 = std::f64::consts::TAU;

fn require_power_of_two(n: usize, what: &str) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(OdtError::validation(format!(
            "{what} must be a power of two, got {n}"
        )));
    }
    Ok(())
}

// ==== complex field ====

/// Complex sample field on a detector-aligned grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2D {
    width: usize,
    height: usize,
    /// Physical pixel spacing in micrometers.
    pixel_pitch: f64,
    values: Vec<Complex64>,
}

impl ComplexField2D {
    pub fn new(width: usize, height: usize, pixel_pitch: f64, values: Vec<Complex64>) -> Result<Self> {
        require_power_of_two(width, "field width")?;
        require_power_of_two(height, "field height")?;
        if !(pixel_pitch > 0.0) || !pixel_pitch.is_finite() {
            return Err(OdtError::validation(format!(
                "pixel_pitch must be positive and finite, got {pixel_pitch}"
            )));
        }
        if values.len() != width * height {
            return Err(OdtError::validation(format!(
                "field payload has {} samples, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, pixel_pitch, values })
    }

    /// All-zero field of the given shape.
    pub fn zeros(width: usize, height: usize, pixel_pitch: f64) -> Result<Self> {
        Self::new(width, height, pixel_pitch, vec![Complex64::ZERO; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Complex64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut Complex64 {
        &mut self.values[y * self.width + x]
    }

    /// Pointwise amplitude image.
    pub fn amplitude(&self) -> PhaseImage {
        PhaseImage::from_parts(self.width, self.height, self.values.iter().map(|v| v.norm()).collect())
    }

    /// Pointwise wrapped argument in (-pi, pi].
    pub fn phase(&self) -> PhaseImage {
        PhaseImage::from_parts(
            self.width,
            self.height,
            // atan2 returns [-pi, pi]; fold the open end onto +pi.
            self.values.iter().map(|v| wrap_angle(v.arg())).collect(),
        )
    }
}

// ==== real raster ====

/// Real-valued raster. Holds unwrapped or wrapped phase in radians for phase
/// maps, but also serves for any real 2-D payload of the pipeline (hologram
/// intensities, saliency maps, amplitude images).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PhaseImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        require_power_of_two(width, "image width")?;
        require_power_of_two(height, "image height")?;
        if values.len() != width * height {
            return Err(OdtError::validation(format!(
                "image payload has {} samples, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(OdtError::validation(format!(
                "image value at flat index {bad} is not finite"
            )));
        }
        Ok(Self { width, height, values })
    }

    /// Internal constructor for values that are finite by construction.
    pub(crate) fn from_parts(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self { width, height, values }
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize) -> &mut f64 {
        &mut self.values[y * self.width + x]
    }

    /// Flat index of the maximum value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0usize;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

// ==== spectrum ====

/// DC-centered 2-D spectrum produced by [`fft2_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    width: usize,
    height: usize,
    /// Frequency step along x in radians per micrometer: 2π/(width·pitch).
    freq_pitch_x: f64,
    /// Frequency step along y: 2π/(height·pitch).
    freq_pitch_y: f64,
    values: Vec<Complex64>,
}

impl Spectrum2D {
    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        freq_pitch_x: f64,
        freq_pitch_y: f64,
        values: Vec<Complex64>,
    ) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self { width, height, freq_pitch_x, freq_pitch_y, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn freq_pitch_x(&self) -> f64 {
        self.freq_pitch_x
    }

    pub fn freq_pitch_y(&self) -> f64 {
        self.freq_pitch_y
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.width + ix]
    }

    #[inline]
    pub fn at_mut(&mut self, ix: usize, iy: usize) -> &mut Complex64 {
        &mut self.values[iy * self.width + ix]
    }

    /// Physical frequency of bin `ix` along x, DC at `width/2`.
    #[inline]
    pub fn freq_x(&self, ix: usize) -> f64 {
        (ix as f64 - (self.width / 2) as f64) * self.freq_pitch_x
    }

    /// Physical frequency of bin `iy` along y, DC at `height/2`.
    #[inline]
    pub fn freq_y(&self, iy: usize) -> f64 {
        (iy as f64 - (self.height / 2) as f64) * self.freq_pitch_y
    }
}

// ==== phase wrapping ====

/// Wraps one angle into (-pi, pi]. Values already inside the interval are
/// returned bit-identically, which makes the operation idempotent.
#[inline]
pub fn wrap_angle(v: f64) -> f64 {
    if v > -std::f64::consts::PI && v <= std::f64::consts::PI {
        return v;
    }
    let mut w = v - TAU * (v / TAU).round();
    // One correction step lands on the half-open convention; the round()
    // reduction already placed w within one turn of the interval.
    if w <= -std::f64::consts::PI {
        w += TAU;
    } else if w > std::f64::consts::PI {
        w -= TAU;
    }
    w
}

/// Pointwise wrap of a phase image into (-pi, pi].
pub fn wrap_phase(image: &PhaseImage) -> PhaseImage {
    PhaseImage::from_parts(
        image.width,
        image.height,
        image.values.iter().map(|&v| wrap_angle(v)).collect(),
    )
}

// ==== cropping ====

fn crop_window(src: usize, dst: usize, axis: &str) -> Result<usize> {
    if dst > src {
        return Err(OdtError::validation(format!(
            "crop {axis} {dst} exceeds source {src}"
        )));
    }
    if (src - dst) % 2 != 0 {
        return Err(OdtError::validation(format!(
            "crop {axis} {dst} is not centered in {src}: sizes must share parity"
        )));
    }
    Ok((src - dst) / 2)
}

/// Symmetric central crop of a complex field; pixel pitch is preserved.
/// For size 128 out of 256 the window is rows and columns [64, 192).
pub fn center_crop(field: &ComplexField2D, width: usize, height: usize) -> Result<ComplexField2D> {
    require_power_of_two(width, "crop width")?;
    require_power_of_two(height, "crop height")?;
    let x0 = crop_window(field.width, width, "width")?;
    let y0 = crop_window(field.height, height, "height")?;
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = (y0 + y) * field.width + x0;
        values.extend_from_slice(&field.values[row..row + width]);
    }
    ComplexField2D::new(width, height, field.pixel_pitch, values)
}

/// Symmetric central crop of a real raster.
pub fn center_crop_image(image: &PhaseImage, width: usize, height: usize) -> Result<PhaseImage> {
    require_power_of_two(width, "crop width")?;
    require_power_of_two(height, "crop height")?;
    let x0 = crop_window(image.width, width, "width")?;
    let y0 = crop_window(image.height, height, "height")?;
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = (y0 + y) * image.width + x0;
        values.extend_from_slice(&image.values[row..row + width]);
    }
    Ok(PhaseImage::from_parts(width, height, values))
}
