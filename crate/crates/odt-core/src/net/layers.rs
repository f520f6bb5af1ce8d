//! Layer primitives: convolution, pooling, linear, activation, dropout.
//!
//! All spatial layers follow the same geometry the screening network uses:
//! 3×3 kernels at stride 1 with one ring of zero padding, so convolution
//! preserves the grid and 2×2 max pooling is the only thing that shrinks it.
//! Convolution is plain cross-correlation (kernels are learned, so the flip
//! that distinguishes it from true convolution is immaterial and skipping it
//! keeps indices readable).
//!
//! The inner loops are written as row slices — for each kernel tap, a whole
//! image row is scaled and added — so the compiler can vectorize them. On a
//! 128×128 field the network costs a few hundred million multiply-adds per
//! pass, which is the budget that dominates training.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{OdtError, Result};
use crate::net::tensor::Tensor;

/// Valid output-row/column range for one kernel tap.
///
/// For tap offset `k` in {0, 1, 2} the source index is `out + k - 1`; the
/// returned half-open range is the set of output positions whose source
/// stays inside `[0, extent)`.
#[inline]
fn tap_range(k: usize, extent: usize) -> (usize, usize) {
    let lo = usize::from(k == 0);
    let hi = if k == 2 { extent - 1 } else { extent };
    (lo, hi)
}

fn check_conv_shapes(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<()> {
    let is = input.shape();
    let ws = weights.shape();
    if is.len() != 3 {
        return Err(OdtError::validation(format!(
            "convolution input must be [channels, height, width], got {is:?}"
        )));
    }
    if ws.len() != 4 || ws[2] != 3 || ws[3] != 3 {
        return Err(OdtError::validation(format!(
            "convolution weights must be [out_ch, in_ch, 3, 3], got {ws:?}"
        )));
    }
    if ws[1] != is[0] {
        return Err(OdtError::validation(format!(
            "weights expect {} input channels, image has {}",
            ws[1], is[0]
        )));
    }
    if bias.len() != ws[0] {
        return Err(OdtError::validation(format!(
            "bias length {} does not match {} output channels",
            bias.len(),
            ws[0]
        )));
    }
    Ok(())
}

/// 3×3 stride-1 cross-correlation with one ring of zero padding.
///
/// `input` is `[in_ch, h, w]`, `weights` is `[out_ch, in_ch, 3, 3]`, and the
/// output is `[out_ch, h, w]`:
///
/// out[o, y, x] = bias[o] + Σ_i Σ_ky Σ_kx w[o, i, ky, kx] · in[i, y+ky−1, x+kx−1]
///
/// with out-of-range source pixels reading as zero.
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor> {
    check_conv_shapes(input, weights, bias)?;
    let (ic, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let oc = weights.shape()[0];
    let inv = input.values();
    let wv = weights.values();
    let mut out = vec![0.0; oc * h * w];

    for o in 0..oc {
        let plane = &mut out[o * h * w..(o + 1) * h * w];
        plane.fill(bias[o]);
        for i in 0..ic {
            let src_plane = &inv[i * h * w..(i + 1) * h * w];
            let kbase = (o * ic + i) * 9;
            for ky in 0..3 {
                let (y0, y1) = tap_range(ky, h);
                for kx in 0..3 {
                    let wk = wv[kbase + ky * 3 + kx];
                    let (x0, x1) = tap_range(kx, w);
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let dst = &mut plane[y * w + x0..y * w + x1];
                        let src = &src_plane[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += wk * *s;
                        }
                    }
                }
            }
        }
    }
    Ok(Tensor::from_parts(vec![oc, h, w], out))
}

/// Gradients of [`conv2d`] with respect to its input, weights, and bias,
/// given the upstream gradient `grad_out` (same shape as the output).
pub(crate) fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Vec<f64>, Vec<f64>) {
    let (ic, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let oc = weights.shape()[0];
    debug_assert_eq!(grad_out.shape(), &[oc, h, w]);
    let inv = input.values();
    let wv = weights.values();
    let gv = grad_out.values();

    let mut grad_in = vec![0.0; ic * h * w];
    let mut grad_w = vec![0.0; wv.len()];
    let mut grad_b = vec![0.0; oc];

    for o in 0..oc {
        let g_plane = &gv[o * h * w..(o + 1) * h * w];
        grad_b[o] = g_plane.iter().sum();
        for i in 0..ic {
            let src_plane = &inv[i * h * w..(i + 1) * h * w];
            let gin_plane = &mut grad_in[i * h * w..(i + 1) * h * w];
            let kbase = (o * ic + i) * 9;
            for ky in 0..3 {
                let (y0, y1) = tap_range(ky, h);
                for kx in 0..3 {
                    let (x0, x1) = tap_range(kx, w);
                    let wk = wv[kbase + ky * 3 + kx];
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let g_row = &g_plane[y * w + x0..y * w + x1];
                        let s_row = &src_plane[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        let gin_row = &mut gin_plane[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                        for ((gw, s), gi) in g_row.iter().zip(s_row).zip(gin_row) {
                            acc += gw * s;
                            *gi += wk * gw;
                        }
                    }
                    grad_w[kbase + ky * 3 + kx] = acc;
                }
            }
        }
    }
    (
        Tensor::from_parts(vec![ic, h, w], grad_in),
        grad_w,
        grad_b,
    )
}

/// 2×2 max pooling at stride 2. Returns the pooled tensor and, for each
/// output cell, the flat index of the winning input element so the backward
/// pass can route gradients. Ties go to the first element in scan order.
pub fn max_pool2(input: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let is = input.shape();
    if is.len() != 3 {
        return Err(OdtError::validation(format!(
            "pooling input must be [channels, height, width], got {is:?}"
        )));
    }
    let (c, h, w) = (is[0], is[1], is[2]);
    if h % 2 != 0 || w % 2 != 0 {
        return Err(OdtError::validation(format!(
            "2x2 pooling needs even extents, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let v = input.values();
    let mut out = vec![0.0; c * oh * ow];
    let mut argmax = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let base = (ch * h + 2 * y) * w + 2 * x;
                let mut best = base;
                for &off in &[1, w, w + 1] {
                    if v[base + off] > v[best] {
                        best = base + off;
                    }
                }
                let j = (ch * oh + y) * ow + x;
                out[j] = v[best];
                argmax[j] = best;
            }
        }
    }
    Ok((Tensor::from_parts(vec![c, oh, ow], out), argmax))
}

/// Scatters pooled-output gradients back to the argmax positions recorded by
/// [`max_pool2`]; every other input position gets zero.
pub(crate) fn max_pool2_backward(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor,
) -> Tensor {
    debug_assert_eq!(argmax.len(), grad_out.len());
    let mut grad_in = vec![0.0; input_shape.iter().product()];
    for (&idx, &g) in argmax.iter().zip(grad_out.values()) {
        grad_in[idx] += g;
    }
    Tensor::from_parts(input_shape.to_vec(), grad_in)
}

/// Global max pooling: one value per channel, plus the flat index of each
/// channel's maximum. This is what makes the network insensitive to the
/// spatial extent of its input.
pub fn adaptive_max_pool_1(input: &Tensor) -> Result<(Vec<f64>, Vec<usize>)> {
    let is = input.shape();
    if is.len() != 3 {
        return Err(OdtError::validation(format!(
            "pooling input must be [channels, height, width], got {is:?}"
        )));
    }
    let (c, hw) = (is[0], is[1] * is[2]);
    let v = input.values();
    let mut out = vec![0.0; c];
    let mut argmax = vec![0usize; c];
    for ch in 0..c {
        let base = ch * hw;
        let mut best = base;
        for j in base + 1..base + hw {
            if v[j] > v[best] {
                best = j;
            }
        }
        out[ch] = v[best];
        argmax[ch] = best;
    }
    Ok((out, argmax))
}

/// Fully connected layer: `out = W·x + b` with `weights` stored row-major as
/// `[out_dim, in_dim]`.
pub fn linear(input: &[f64], weights: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let (in_dim, out_dim) = (input.len(), bias.len());
    if weights.len() != in_dim * out_dim {
        return Err(OdtError::validation(format!(
            "linear weights length {} does not match {out_dim}x{in_dim}",
            weights.len()
        )));
    }
    let mut out = Vec::with_capacity(out_dim);
    for r in 0..out_dim {
        let row = &weights[r * in_dim..(r + 1) * in_dim];
        let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
        out.push(dot + bias[r]);
    }
    Ok(out)
}

/// Gradients of [`linear`]: upstream `grad_out` (length `out_dim`) yields
/// (grad_input, grad_weights, grad_bias).
pub(crate) fn linear_backward(
    input: &[f64],
    weights: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (in_dim, out_dim) = (input.len(), grad_out.len());
    debug_assert_eq!(weights.len(), in_dim * out_dim);
    let mut grad_in = vec![0.0; in_dim];
    let mut grad_w = vec![0.0; in_dim * out_dim];
    for r in 0..out_dim {
        let g = grad_out[r];
        let row = &weights[r * in_dim..(r + 1) * in_dim];
        for (gi, w) in grad_in.iter_mut().zip(row) {
            *gi += w * g;
        }
        let gw_row = &mut grad_w[r * in_dim..(r + 1) * in_dim];
        for (gw, x) in gw_row.iter_mut().zip(input) {
            *gw = g * x;
        }
    }
    (grad_in, grad_w, grad_out.to_vec())
}

/// Rectified linear unit, in place.
pub fn relu(values: &mut [f64]) {
    for v in values {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1/(1−rate)`, so the expected value of a masked activation equals the
/// activation itself and inference needs no rescaling.
pub(crate) fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&rate));
    let keep_scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep_scale
            }
        })
        .collect()
}

/// Logistic squashing of a single logit.
pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

// ==== tests ====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use rand::Rng;

    const EPS_ORACLE: f64 = 1e-12;
    const EPS_GRAD: f64 = 1e-6;

    fn random_tensor(shape: Vec<usize>, scale: f64, seed: u64) -> Tensor {
        let mut rng = derive_rng(seed, &[71]);
        let n = shape.iter().product();
        let vals = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        Tensor::new(shape, vals).unwrap()
    }

    /// Direct six-loop cross-correlation with explicit zero padding; the
    /// independent reference the fast row-slice kernel must reproduce.
    fn conv_reference(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Vec<f64> {
        let (ic, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let oc = weights.shape()[0];
        let mut out = vec![0.0; oc * h * w];
        for o in 0..oc {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = bias[o];
                    for i in 0..ic {
                        for ky in 0..3usize {
                            for kx in 0..3usize {
                                let sy = y as i64 + ky as i64 - 1;
                                let sx = x as i64 + kx as i64 - 1;
                                if sy < 0 || sy >= h as i64 || sx < 0 || sx >= w as i64 {
                                    continue;
                                }
                                let wv = weights.values()[((o * ic + i) * 3 + ky) * 3 + kx];
                                acc += wv * input.at3(i, sy as usize, sx as usize);
                            }
                        }
                    }
                    out[(o * h + y) * w + x] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_summation() {
        let input = random_tensor(vec![2, 5, 5], 1.5, 11);
        let weights = random_tensor(vec![3, 2, 3, 3], 0.8, 12);
        let bias = [0.3, -0.2, 0.05];
        let got = conv2d(&input, &weights, &bias).unwrap();
        let want = conv_reference(&input, &weights, &bias);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((g - w).abs() < EPS_ORACLE, "conv deviates: {g} vs {w}");
        }
    }

    #[test]
    fn centre_tap_identity_kernel_copies_the_image() {
        let input = random_tensor(vec![1, 6, 7], 2.0, 21);
        let mut w = vec![0.0; 9];
        w[4] = 1.0; // ky = 1, kx = 1: the unshifted tap
        let weights = Tensor::new(vec![1, 1, 3, 3], w).unwrap();
        let out = conv2d(&input, &weights, &[0.0]).unwrap();
        assert_eq!(out.values(), input.values());
    }

    #[test]
    fn off_centre_tap_shifts_and_zero_pads() {
        // Weight on the tap above centre (ky = 0) reads the row ABOVE each
        // output pixel, so the image shifts down and row 0 sees padding.
        let vals: Vec<f64> = (1..=12).map(f64::from).collect();
        let input = Tensor::new(vec![1, 3, 4], vals).unwrap();
        let mut w = vec![0.0; 9];
        w[1] = 1.0; // ky = 0, kx = 1
        let weights = Tensor::new(vec![1, 1, 3, 3], w).unwrap();
        let out = conv2d(&input, &weights, &[0.0]).unwrap();
        let want = [0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(out.values(), &want);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        // Scalar objective L = sum(c .* conv(x, w, b)) with fixed random c;
        // central differences over every input, weight, and bias entry.
        let input = random_tensor(vec![2, 4, 4], 1.0, 31);
        let weights = random_tensor(vec![2, 2, 3, 3], 0.7, 32);
        let bias = [0.1, -0.4];
        let coeffs = random_tensor(vec![2, 4, 4], 1.0, 33);

        let loss = |inp: &Tensor, wts: &Tensor, b: &[f64]| -> f64 {
            let out = conv2d(inp, wts, b).unwrap();
            out.values().iter().zip(coeffs.values()).map(|(o, c)| o * c).sum()
        };
        let (gin, gw, gb) = conv2d_backward(&input, &weights, &coeffs);

        let h = 1e-6;
        let check = |analytic: f64, fd: f64, what: &str| {
            let err = (analytic - fd).abs() / fd.abs().max(1.0);
            assert!(err < EPS_GRAD, "{what}: analytic {analytic} vs fd {fd}");
        };
        for j in 0..input.len() {
            let mut p = input.clone();
            p.values_mut()[j] += h;
            let mut m = input.clone();
            m.values_mut()[j] -= h;
            let fd = (loss(&p, &weights, &bias) - loss(&m, &weights, &bias)) / (2.0 * h);
            check(gin.values()[j], fd, "d/d input");
        }
        for j in 0..weights.len() {
            let mut p = weights.clone();
            p.values_mut()[j] += h;
            let mut m = weights.clone();
            m.values_mut()[j] -= h;
            let fd = (loss(&input, &p, &bias) - loss(&input, &m, &bias)) / (2.0 * h);
            check(gw[j], fd, "d/d weight");
        }
        for j in 0..bias.len() {
            let mut p = bias;
            p[j] += h;
            let mut m = bias;
            m[j] -= h;
            let fd = (loss(&input, &weights, &p) - loss(&input, &weights, &m)) / (2.0 * h);
            check(gb[j], fd, "d/d bias");
        }
    }

    #[test]
    fn pooling_keeps_window_maxima_and_their_positions() {
        let vals = vec![
            1.0, 5.0, 2.0, 0.0, //
            3.0, 4.0, 0.0, 6.0, //
            -1.0, -2.0, 9.0, 8.0, //
            -3.0, -4.0, 7.0, 9.5,
        ];
        let input = Tensor::new(vec![1, 4, 4], vals).unwrap();
        let (out, argmax) = max_pool2(&input).unwrap();
        assert_eq!(out.shape(), &[1, 2, 2]);
        assert_eq!(out.values(), &[5.0, 6.0, -1.0, 9.5]);
        assert_eq!(argmax, vec![1, 7, 8, 15]);
    }

    #[test]
    fn pooling_ties_resolve_to_first_in_scan_order() {
        let input = Tensor::new(vec![1, 2, 2], vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        let (_, argmax) = max_pool2(&input).unwrap();
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn pooling_backward_routes_gradient_to_the_winner() {
        let vals = vec![1.0, 5.0, 3.0, 4.0];
        let input = Tensor::new(vec![1, 2, 2], vals).unwrap();
        let (_, argmax) = max_pool2(&input).unwrap();
        let g = Tensor::new(vec![1, 1, 1], vec![2.5]).unwrap();
        let gin = max_pool2_backward(&[1, 2, 2], &argmax, &g);
        assert_eq!(gin.values(), &[0.0, 2.5, 0.0, 0.0]);
    }

    #[test]
    fn pooling_rejects_odd_extents() {
        let input = Tensor::zeros(vec![1, 3, 4]);
        assert!(max_pool2(&input).is_err());
    }

    #[test]
    fn adaptive_pooling_takes_one_maximum_per_channel() {
        let vals = vec![
            1.0, -2.0, 7.0, 0.5, // channel 0: max 7.0 at flat index 2
            -4.0, -1.0, -9.0, -3.0, // channel 1: max -1.0 at flat index 5
        ];
        let input = Tensor::new(vec![2, 2, 2], vals).unwrap();
        let (out, argmax) = adaptive_max_pool_1(&input).unwrap();
        assert_eq!(out, vec![7.0, -1.0]);
        assert_eq!(argmax, vec![2, 5]);
    }

    #[test]
    fn linear_matches_hand_computation() {
        // W = [[1, 2, 3], [0, -1, 4]], x = [0.5, 1, -2], b = [0.25, -0.5]
        let out = linear(
            &[0.5, 1.0, -2.0],
            &[1.0, 2.0, 3.0, 0.0, -1.0, 4.0],
            &[0.25, -0.5],
        )
        .unwrap();
        assert!((out[0] - (-3.25)).abs() < EPS_ORACLE);
        assert!((out[1] - (-9.5)).abs() < EPS_ORACLE);
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = derive_rng(5, &[1]);
        let input: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias = [0.0; 3];

        let loss = |x: &[f64], w: &[f64]| -> f64 {
            linear(x, w, &bias)
                .unwrap()
                .iter()
                .zip(&coeffs)
                .map(|(o, c)| o * c)
                .sum()
        };
        let (gin, gw, gb) = linear_backward(&input, &weights, &coeffs);
        assert_eq!(gb, coeffs);

        let h = 1e-6;
        for j in 0..input.len() {
            let mut p = input.clone();
            p[j] += h;
            let mut m = input.clone();
            m[j] -= h;
            let fd = (loss(&p, &weights) - loss(&m, &weights)) / (2.0 * h);
            assert!((gin[j] - fd).abs() < EPS_GRAD);
        }
        for j in 0..weights.len() {
            let mut p = weights.clone();
            p[j] += h;
            let mut m = weights.clone();
            m[j] -= h;
            let fd = (loss(&input, &p) - loss(&input, &m)) / (2.0 * h);
            assert!((gw[j] - fd).abs() < EPS_GRAD);
        }
    }

    #[test]
    fn dropout_mask_scales_survivors_and_zeroes_the_rate_fraction() {
        let mut rng = derive_rng(9, &[4]);
        let mask = dropout_mask(20_000, 0.5, &mut rng);
        let zeros = mask.iter().filter(|&&m| m == 0.0).count();
        let frac = zeros as f64 / mask.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "dropped fraction {frac}");
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn relu_clamps_only_negatives() {
        let mut v = vec![-1.5, 0.0, 2.5, -0.0];
        relu(&mut v);
        assert_eq!(v, vec![0.0, 0.0, 2.5, -0.0]);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let img = Tensor::zeros(vec![2, 4, 4]);
        let w_bad_in = Tensor::zeros(vec![3, 1, 3, 3]);
        assert!(conv2d(&img, &w_bad_in, &[0.0; 3]).is_err());
        let w = Tensor::zeros(vec![3, 2, 3, 3]);
        assert!(conv2d(&img, &w, &[0.0; 2]).is_err());
        assert!(linear(&[1.0, 2.0], &[1.0, 2.0, 3.0], &[0.0]).is_err());
    }
}
