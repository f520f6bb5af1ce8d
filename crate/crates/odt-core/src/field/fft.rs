//! Radix-2 FFTs with unitary normalization.
//!
//! Both directions scale by 1/sqrt(len), so transforming preserves the L2
//! norm and a forward/inverse pair is the identity up to rounding. Forward
//! output is DC-centered (see the module docs in [`super`]); the inverse
//! expects the same layout. Grid sizes are powers of two by construction of
//! the raster types, which keeps the kernel a single tight code path.

use num_complex::Complex64;

use super::{ComplexField2D, Spectrum2D, TAU};

/// Precomputed twiddle table for one transform length. Reused across every
/// row or column of that length, which matters when a volume pass runs tens
/// of thousands of short transforms.
pub struct Fft1D {
    n: usize,
    /// twiddles[j] = exp(-2πi·j/n), j < n/2.
    twiddles: Vec<Complex64>,
}

impl Fft1D {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..n / 2)
            .map(|j| {
                let ang = -TAU * j as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        Self { n, twiddles }
    }

    /// In-place transform without normalization; `inverse` conjugates the
    /// twiddles. Callers apply the unitary 1/sqrt scale once per dimension
    /// sweep rather than per line.
    pub fn process(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        if n <= 1 {
            return;
        }

        // Bit-reversal permutation.
        let mut j = 0usize;
        for i in 0..n - 1 {
            if i < j {
                buf.swap(i, j);
            }
            let mut k = n >> 1;
            while j & k != 0 {
                j ^= k;
                k >>= 1;
            }
            j |= k;
        }

        // Iterative butterflies, smallest spans first.
        let mut len = 2usize;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                let mut tw = 0usize;
                for k in start..start + half {
                    let mut w = self.twiddles[tw];
                    if inverse {
                        w = w.conj();
                    }
                    let b = buf[k + half] * w;
                    let a = buf[k];
                    buf[k] = a + b;
                    buf[k + half] = a - b;
                    tw += stride;
                }
            }
            len <<= 1;
        }
    }
}

/// In-place half-turn rotation along both axes. For power-of-two sizes the
/// shift is index XOR half, its own inverse, so the same routine centers a
/// spectrum and undoes the centering.
fn shift2(values: &mut [Complex64], width: usize, height: usize) {
    let hx = width / 2;
    let hy = height / 2;
    for y in 0..height {
        for x in 0..width {
            let src = y * width + x;
            let dst = (y ^ hy) * width + (x ^ hx);
            if src < dst {
                values.swap(src, dst);
            }
        }
    }
}

fn transform_rows(values: &mut [Complex64], width: usize, plan: &Fft1D, inverse: bool) {
    for row in values.chunks_exact_mut(width) {
        plan.process(row, inverse);
    }
}

fn transform_cols(
    values: &mut [Complex64],
    width: usize,
    height: usize,
    plan: &Fft1D,
    inverse: bool,
    scratch: &mut Vec<Complex64>,
) {
    scratch.clear();
    scratch.resize(height, Complex64::ZERO);
    for x in 0..width {
        for y in 0..height {
            scratch[y] = values[y * width + x];
        }
        plan.process(scratch, inverse);
        for y in 0..height {
            values[y * width + x] = scratch[y];
        }
    }
}

/// Unitary forward transform of a field; output is DC-centered with
/// frequency pitch 2π/(n·pixel_pitch) per axis.
pub fn fft2_forward(field: &ComplexField2D) -> Spectrum2D {
    let (w, h) = (field.width(), field.height());
    let mut data = field.values().to_vec();
    let plan_w = Fft1D::new(w);
    let plan_h = Fft1D::new(h);
    transform_rows(&mut data, w, &plan_w, false);
    let mut scratch = Vec::new();
    transform_cols(&mut data, w, h, &plan_h, false, &mut scratch);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    for v in &mut data {
        *v *= scale;
    }
    shift2(&mut data, w, h);
    let pitch = field.pixel_pitch();
    Spectrum2D::from_parts(w, h, TAU / (w as f64 * pitch), TAU / (h as f64 * pitch), data)
}

/// Unitary inverse of [`fft2_forward`]. The pixel pitch is recovered from the
/// frequency pitch, so a forward/inverse round trip reproduces the input
/// field including its geometry.
pub fn fft2_inverse(spectrum: &Spectrum2D) -> ComplexField2D {
    let (w, h) = (spectrum.width(), spectrum.height());
    let mut data = spectrum.values().to_vec();
    shift2(&mut data, w, h);
    let plan_w = Fft1D::new(w);
    let plan_h = Fft1D::new(h);
    transform_rows(&mut data, w, &plan_w, true);
    let mut scratch = Vec::new();
    transform_cols(&mut data, w, h, &plan_h, true, &mut scratch);
    let scale = 1.0 / ((w * h) as f64).sqrt();
    for v in &mut data {
        *v *= scale;
    }
    let pixel_pitch = TAU / (w as f64 * spectrum.freq_pitch_x());
    ComplexField2D::new(w, h, pixel_pitch, data)
        .expect("spectrum dimensions are valid by construction")
}

/// Unitary 3-D transform over a z-major volume (`values[(z·ny + y)·nx + x]`),
/// DC-centered on both sides: the forward direction shifts its output to put
/// frequency zero at (nx/2, ny/2, nz/2) and the inverse undoes that layout
/// before transforming back.
pub fn fft3_centered(values: &mut [Complex64], nx: usize, ny: usize, nz: usize, inverse: bool) {
    assert_eq!(values.len(), nx * ny * nz, "volume payload mismatch");
    assert!(
        nx.is_power_of_two() && ny.is_power_of_two() && nz.is_power_of_two(),
        "volume dimensions must be powers of two"
    );
    if inverse {
        shift3(values, nx, ny, nz);
    }

    let plan_x = Fft1D::new(nx);
    transform_rows(values, nx, &plan_x, inverse);

    let plan_y = Fft1D::new(ny);
    let mut scratch = Vec::new();
    for slab in values.chunks_exact_mut(nx * ny) {
        transform_cols(slab, nx, ny, &plan_y, inverse, &mut scratch);
    }

    let plan_z = Fft1D::new(nz);
    let mut line = vec![Complex64::ZERO; nz];
    let slab = nx * ny;
    for xy in 0..slab {
        for z in 0..nz {
            line[z] = values[z * slab + xy];
        }
        plan_z.process(&mut line, inverse);
        for z in 0..nz {
            values[z * slab + xy] = line[z];
        }
    }

    let scale = 1.0 / ((nx * ny * nz) as f64).sqrt();
    for v in values.iter_mut() {
        *v *= scale;
    }
    if !inverse {
        shift3(values, nx, ny, nz);
    }
}

fn shift3(values: &mut [Complex64], nx: usize, ny: usize, nz: usize) {
    let (hx, hy, hz) = (nx / 2, ny / 2, nz / 2);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let src = (z * ny + y) * nx + x;
                let dst = ((z ^ hz) * ny + (y ^ hy)) * nx + (x ^ hx);
                if src < dst {
                    values.swap(src, dst);
                }
            }
        }
    }
}
