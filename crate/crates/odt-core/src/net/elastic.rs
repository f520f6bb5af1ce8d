//! Elastic deformation for training-set augmentation.
//!
//! Simulated fields are too regular: every bead is round, every fringe is
//! straight. Elastic warps break that regularity the way real samples do —
//! smooth, locally rigid distortions — without touching the labels, since a
//! parasitic fringe stays a fringe under a gentle warp. The construction is
//! the standard one: a per-pixel random displacement field, Gaussian
//! smoothing to make it spatially coherent (std `sigma`), scaling to the
//! desired strength (`alpha`, in pixels), then bilinear resampling with
//! coordinates clamped at the image edge. All channels of one image share
//! one displacement field, so multi-channel representations stay aligned.

use rand::Rng;

use crate::error::{OdtError, Result};
use crate::net::tensor::Tensor;
use crate::seed::derive_rng;

// Tag separating displacement draws from the other derived streams.
const TAG_ELASTIC: u64 = 13;

/// Separable Gaussian blur of one `h`×`w` scalar field, zero-padded at the
/// borders. The kernel is truncated at ±3σ and normalized to unit sum.
fn gaussian_smooth(field: &mut Vec<f64>, h: usize, w: usize, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    for i in -(radius as i64)..=radius as i64 {
        kernel.push((-0.5 * (i as f64 / sigma).powi(2)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= norm;
    }

    let mut tmp = vec![0.0; field.len()];
    // Rows.
    for y in 0..h {
        let row = &field[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let sx = x as i64 + j as i64 - radius as i64;
                if sx >= 0 && sx < w as i64 {
                    acc += k * row[sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    // Columns.
    for x in 0..w {
        for y in 0..h {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                let sy = y as i64 + j as i64 - radius as i64;
                if sy >= 0 && sy < h as i64 {
                    acc += k * tmp[sy as usize * w + x];
                }
            }
            field[y * w + x] = acc;
        }
    }
}

/// Bilinear sample of one channel plane at a fractional position, with the
/// position clamped into the image.
#[inline]
fn sample_clamped(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let top = (1.0 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
    let bottom = (1.0 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
    (1.0 - fy) * top + fy * bottom
}

/// Warps a `[channels, h, w]` image with a smooth random displacement field
/// of strength `alpha` (pixels) and correlation length `sigma` (pixels).
/// `alpha = 0` is the identity. The same seed always produces the same warp.
pub fn elastic_transform(image: &Tensor, alpha: f64, sigma: f64, seed: u64) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 3 {
        return Err(OdtError::validation(format!(
            "elastic transform input must be [channels, height, width], got {shape:?}"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(OdtError::validation(format!(
            "displacement strength must be finite and non-negative, got {alpha}"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(OdtError::validation(format!(
            "smoothing sigma must be positive and finite, got {sigma}"
        )));
    }
    if alpha == 0.0 {
        return Ok(image.clone());
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);

    let mut rng = derive_rng(seed, &[TAG_ELASTIC]);
    let mut dx: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut dy: Vec<f64> = (0..h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
    gaussian_smooth(&mut dx, h, w, sigma);
    gaussian_smooth(&mut dy, h, w, sigma);

    let v = image.values();
    let mut out = vec![0.0; v.len()];
    for ch in 0..c {
        let plane = &v[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * h * w..(ch + 1) * h * w];
        for y in 0..h {
            for x in 0..w {
                let j = y * w + x;
                dst[j] = sample_clamped(
                    plane,
                    h,
                    w,
                    y as f64 + alpha * dy[j],
                    x as f64 + alpha * dx[j],
                );
            }
        }
    }
    Ok(Tensor::from_parts(shape.to_vec(), out))
}

// ==== tests ====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use rand::Rng;

    const EPS_LINEAR: f64 = 1e-12;

    fn random_image(c: usize, side: usize, seed: u64) -> Tensor {
        let mut rng = derive_rng(seed, &[91]);
        let vals = (0..c * side * side)
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        Tensor::new(vec![c, side, side], vals).unwrap()
    }

    #[test]
    fn zero_strength_is_the_identity() {
        let img = random_image(1, 16, 1);
        let out = elastic_transform(&img, 0.0, 4.0, 7).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_images_stay_constant() {
        let img = Tensor::new(vec![1, 12, 12], vec![3.25; 144]).unwrap();
        let out = elastic_transform(&img, 8.0, 4.0, 3).unwrap();
        for &v in out.values() {
            assert!((v - 3.25).abs() < EPS_LINEAR);
        }
    }

    #[test]
    fn warping_never_leaves_the_input_value_range() {
        // Bilinear samples are convex combinations of input pixels, so the
        // output range must sit inside the input range for any seed.
        for trial in 0..100u64 {
            let img = random_image(1, 16, 300 + trial);
            let lo = img.values().iter().cloned().fold(f64::MAX, f64::min);
            let hi = img.values().iter().cloned().fold(f64::MIN, f64::max);
            let alpha = 1.0 + (trial % 13) as f64;
            let sigma = 1.0 + (trial % 5) as f64;
            let out = elastic_transform(&img, alpha, sigma, trial).unwrap();
            for &v in out.values() {
                assert!(v >= lo - EPS_LINEAR && v <= hi + EPS_LINEAR);
            }
        }
    }

    #[test]
    fn same_seed_same_warp_different_seed_different_warp() {
        let img = random_image(1, 16, 5);
        let a = elastic_transform(&img, 6.0, 3.0, 40).unwrap();
        let b = elastic_transform(&img, 6.0, 3.0, 40).unwrap();
        assert_eq!(a, b);
        let c = elastic_transform(&img, 6.0, 3.0, 41).unwrap();
        assert_ne!(a, c);
        // And it actually moves something.
        assert_ne!(a, img);
    }

    #[test]
    fn channels_share_one_displacement_field() {
        // Build channel 1 = 2·channel 0. Warping is linear in pixel values,
        // so if both channels see the same displacements, the warped second
        // channel must equal twice the warped first channel.
        let base = random_image(1, 16, 6);
        let mut vals = base.values().to_vec();
        vals.extend(base.values().iter().map(|v| 2.0 * v));
        let img = Tensor::new(vec![2, 16, 16], vals).unwrap();
        let out = elastic_transform(&img, 5.0, 3.0, 9).unwrap();
        let n = 16 * 16;
        for j in 0..n {
            let a = out.values()[j];
            let b = out.values()[n + j];
            assert!(
                (b - 2.0 * a).abs() < EPS_LINEAR,
                "channel coupling broken at {j}: {b} vs 2x{a}"
            );
        }
    }

    #[test]
    fn degenerate_arguments_are_rejected() {
        let img = random_image(1, 8, 7);
        assert!(elastic_transform(&img, -1.0, 4.0, 0).is_err());
        assert!(elastic_transform(&img, f64::NAN, 4.0, 0).is_err());
        assert!(elastic_transform(&img, 8.0, 0.0, 0).is_err());
        assert!(elastic_transform(&img, 8.0, f64::INFINITY, 0).is_err());
        let flat = Tensor::zeros(vec![8, 8]);
        assert!(elastic_transform(&flat, 8.0, 4.0, 0).is_err());
    }
}
