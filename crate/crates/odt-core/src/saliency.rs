//! Saliency maps for the learned screen: where the network looks when it
//! scores a field.
//!
//! Three complementary views, each reduced to one map at the network-input
//! resolution and min–max normalized to [0, 1]:
//!
//! * **Class-activation map** — the last conv block's activation maps,
//!   weighted per channel by the logit's gradient with respect to that
//!   channel's pooled scalar, summed over channels, and clamped at zero.
//!   Coarse (the last block's grid is only a few cells wide) but
//!   class-faithful: it marks the regions that raise the noisy score.
//! * **Guided backpropagation** — the logit gradient carried down to the
//!   second conv block's output, with every ReLU crossing gated in both
//!   directions: positions whose forward activation was non-positive *or*
//!   whose backward signal turned negative are silenced. What survives is
//!   fine-grained evidence in favor of the score, reduced across channels
//!   by the largest absolute response.
//! * **Their pointwise product** — the fine detail masked to the coarse
//!   class-relevant region.
//!
//! Every map is computed in eval mode (dropout off), so each is a pure
//! function of the parameters and the image.

use crate::error::{OdtError, Result};
use crate::field::PhaseImage;
use crate::net::layers::{conv2d_backward, linear_backward, max_pool2_backward};
use crate::net::{forward_pass, ForwardCache, NetParams, RunMode, Tensor};

// ==== map container ====

/// One normalized saliency map.
///
/// `degenerate` records that the raw map carried no contrast at all (for
/// example when zeroed head weights kill the logit gradient); the stored
/// values are then all zeros rather than an arbitrary rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    degenerate: bool,
}

impl SaliencyMap {
    /// Wraps raw finite values without rescaling them.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(OdtError::validation(format!(
                "map payload has {} samples, expected {width}x{height}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(OdtError::validation(
                "map values must be finite".to_string(),
            ));
        }
        let degenerate = values.windows(2).all(|w| w[0] == w[1]);
        Ok(Self {
            width,
            height,
            values,
            degenerate,
        })
    }

    /// Normalizes raw values into a map, flagging constant inputs.
    fn normalized(width: usize, height: usize, mut values: Vec<f64>) -> Self {
        let degenerate = !min_max_normalize(&mut values);
        Self {
            width,
            height,
            values,
            degenerate,
        }
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

    /// True when the raw map was constant and was therefore zeroed.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Quantizes to 8-bit grayscale, mapping [0, 1] onto 0..=255.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Converts to the shared raster type (power-of-two sides required).
    pub fn to_phase_image(&self) -> Result<PhaseImage> {
        PhaseImage::new(self.width, self.height, self.values.clone())
    }
}

/// Rescales `values` to span [0, 1]; a constant slice is set to all zeros.
/// Returns whether the slice carried any contrast.
pub fn min_max_normalize(values: &mut [f64]) -> bool {
    let Some(&first) = values.first() else {
        return false;
    };
    let mut lo = first;
    let mut hi = first;
    for &v in values.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        values.fill(0.0);
        return false;
    }
    let span = hi - lo;
    for v in values.iter_mut() {
        *v = (*v - lo) / span;
    }
    true
}

/// Align-corners bilinear interpolation from `width`×`height` onto
/// `target_width`×`target_height`.
///
/// Corner samples are reproduced exactly and a same-size call is the
/// identity; shrinking along either axis is rejected.
pub fn bilinear_upsample(
    values: &[f64],
    width: usize,
    height: usize,
    target_width: usize,
    target_height: usize,
) -> Result<Vec<f64>> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(OdtError::validation(format!(
            "map payload has {} samples, expected {width}x{height}",
            values.len()
        )));
    }
    if target_width < width || target_height < height {
        return Err(OdtError::validation(format!(
            "cannot upsample {width}x{height} down to {target_width}x{target_height}"
        )));
    }
    // Align-corners source coordinate for one destination index.
    let scale = |dst: usize, src_n: usize, dst_n: usize| -> f64 {
        if dst_n <= 1 {
            0.0
        } else {
            dst as f64 * (src_n - 1) as f64 / (dst_n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(target_width * target_height);
    for ty in 0..target_height {
        let sy = scale(ty, height, target_height);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(height - 1);
        let fy = sy - y0 as f64;
        for tx in 0..target_width {
            let sx = scale(tx, width, target_width);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(width - 1);
            let fx = sx - x0 as f64;
            let top = (1.0 - fx) * values[y0 * width + x0] + fx * values[y0 * width + x1];
            let bottom = (1.0 - fx) * values[y1 * width + x0] + fx * values[y1 * width + x1];
            out.push((1.0 - fy) * top + fy * bottom);
        }
    }
    Ok(out)
}

// ==== the three maps ====

/// Gradient of the output logit with respect to the pooled feature vector.
/// With `guided` set, each ReLU crossing in the head also zeroes entries
/// whose backward signal is negative.
fn head_logit_gradient(params: &NetParams, cache: &ForwardCache, guided: bool) -> Vec<f64> {
    let mut g = vec![1.0];
    for i in (0..params.linears.len()).rev() {
        let (grad_in, _, _) = linear_backward(&cache.head_inputs[i], &params.linears[i].weights, &g);
        g = grad_in;
        if i > 0 {
            for (u, z) in g.iter_mut().zip(&cache.head_pre_act[i - 1]) {
                if *z <= 0.0 || (guided && *u < 0.0) {
                    *u = 0.0;
                }
            }
        }
    }
    g
}

/// Class-activation map: the last conv block's activation maps, weighted
/// per channel by the logit gradient at the pooled scalars, summed, clamped
/// at zero, upsampled to the input size, and normalized.
///
/// A raw map with no contrast — e.g. when the logit gradient is identically
/// zero, or when a constant image yields spatially uniform activations —
/// comes back all-zero with the `degenerate` flag set.
pub fn cam_map(params: &NetParams, image: &Tensor) -> Result<SaliencyMap> {
    let cache = forward_pass(params, image, RunMode::Eval, &[], 0)?;
    let weights = head_logit_gradient(params, &cache, false);
    let last_pre = cache
        .conv_pre_relu
        .last()
        .expect("validated networks have at least one conv block");
    let (mh, mw) = (last_pre.shape()[1], last_pre.shape()[2]);
    let mut cam = vec![0.0; mh * mw];
    for (ch, &w) in weights.iter().enumerate() {
        let plane = &last_pre.values()[ch * mh * mw..(ch + 1) * mh * mw];
        for (c, &pre) in cam.iter_mut().zip(plane) {
            *c += w * pre.max(0.0);
        }
    }
    for c in cam.iter_mut() {
        *c = c.max(0.0);
    }
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let up = bilinear_upsample(&cam, mw, mh, w, h)?;
    Ok(SaliencyMap::normalized(w, h, up))
}

/// Guided backpropagation, taken at the second conv block's output and
/// reduced across channels by the largest absolute response, then upsampled
/// to the input size and normalized.
pub fn guided_backprop(params: &NetParams, image: &Tensor) -> Result<SaliencyMap> {
    let n_convs = params.convs.len();
    if n_convs < 3 {
        return Err(OdtError::validation(format!(
            "guided backpropagation reads the second conv block's output \
             and needs at least three conv blocks, got {n_convs}"
        )));
    }
    let cache = forward_pass(params, image, RunMode::Eval, &[], 0)?;
    let g = head_logit_gradient(params, &cache, true);

    // Undo the global pool: each feature's gradient lands on its argmax cell.
    let last_pre = &cache.conv_pre_relu[n_convs - 1];
    let mut d_act = vec![0.0; last_pre.len()];
    for (ch, &idx) in cache.adaptive_argmax.iter().enumerate() {
        d_act[idx] += g[ch];
    }
    let mut d_act = Tensor::from_parts(last_pre.shape().to_vec(), d_act);

    // Walk the conv blocks back to the second block's output, gating every
    // ReLU crossing in both directions.
    let mut at_second_output = None;
    for i in (2..n_convs).rev() {
        let pre = &cache.conv_pre_relu[i];
        for (u, z) in d_act.values_mut().iter_mut().zip(pre.values()) {
            if *z <= 0.0 || *u < 0.0 {
                *u = 0.0;
            }
        }
        let conv = &params.convs[i];
        let weights = Tensor::from_parts(vec![conv.out_ch, conv.in_ch, 3, 3], conv.weights.clone());
        let (d_input, _, _) = conv2d_backward(&cache.conv_inputs[i], &weights, &d_act);
        if i > 2 {
            d_act = max_pool2_backward(
                cache.conv_pre_relu[i - 1].shape(),
                &cache.pool_argmax[i - 1],
                &d_input,
            );
        } else {
            at_second_output = Some(d_input);
        }
    }
    let grad = at_second_output.expect("loop reaches block index 2");

    let (channels, gh, gw) = (grad.shape()[0], grad.shape()[1], grad.shape()[2]);
    let mut map = vec![0.0; gh * gw];
    for ch in 0..channels {
        let plane = &grad.values()[ch * gh * gw..(ch + 1) * gh * gw];
        for (m, &v) in map.iter_mut().zip(plane) {
            *m = f64::max(*m, v.abs());
        }
    }
    let (h, w) = (image.shape()[1], image.shape()[2]);
    let up = bilinear_upsample(&map, gw, gh, w, h)?;
    Ok(SaliencyMap::normalized(w, h, up))
}

/// Pointwise product of a class-activation map and a guided-backpropagation
/// map, renormalized: fine-grained evidence masked to the class-relevant
/// region.
pub fn grad_cam(cam: &SaliencyMap, guided: &SaliencyMap) -> Result<SaliencyMap> {
    if cam.width != guided.width || cam.height != guided.height {
        return Err(OdtError::validation(format!(
            "map shapes differ: {}x{} vs {}x{}",
            cam.width, cam.height, guided.width, guided.height
        )));
    }
    let values: Vec<f64> = cam
        .values
        .iter()
        .zip(&guided.values)
        .map(|(a, b)| a * b)
        .collect();
    Ok(SaliencyMap::normalized(cam.width, cam.height, values))
}

// ==== tests ====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_custom_params, ConvLayer, InputMode};
    use crate::seed::derive_rng;
    use rand::Rng;

    const EPS: f64 = 1e-12;

    fn random_image(side: usize, seed: u64) -> Tensor {
        let mut rng = derive_rng(seed, &[71]);
        let vals = (0..side * side).map(|_| rng.random_range(-2.0..2.0)).collect();
        Tensor::new(vec![1, side, side], vals).unwrap()
    }

    /// Zeroes every conv tap except the kernel center, making each conv a
    /// pointwise mix with no padding dependence.
    fn keep_center_taps_only(params: &mut NetParams) {
        for conv in params.convs.iter_mut() {
            for oc in 0..conv.out_ch {
                for ic in 0..conv.in_ch {
                    for t in 0..9 {
                        let idx = ((oc * conv.in_ch + ic) * 3 + t / 3) * 3 + t % 3;
                        if t != 4 {
                            conv.weights[idx] = 0.0;
                        }
                    }
                }
            }
        }
    }

    // ---- independent gated-chain reference ----

    fn ref_linear_grad_in(input_len: usize, weights: &[f64], g_out: &[f64]) -> Vec<f64> {
        let mut g_in = vec![0.0; input_len];
        for (r, &g) in g_out.iter().enumerate() {
            for (c, gi) in g_in.iter_mut().enumerate() {
                *gi += weights[r * input_len + c] * g;
            }
        }
        g_in
    }

    fn ref_conv_grad_in(conv: &ConvLayer, h: usize, w: usize, g_out: &[f64]) -> Vec<f64> {
        let mut g_in = vec![0.0; conv.in_ch * h * w];
        for oc in 0..conv.out_ch {
            for ic in 0..conv.in_ch {
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let wgt = conv.weights[((oc * conv.in_ch + ic) * 3 + ky) * 3 + kx];
                        for yy in 0..h {
                            for xx in 0..w {
                                let y = yy as isize + 1 - ky as isize;
                                let x = xx as isize + 1 - kx as isize;
                                if y >= 0 && (y as usize) < h && x >= 0 && (x as usize) < w {
                                    g_in[(ic * h + yy) * w + xx] +=
                                        wgt * g_out[(oc * h + y as usize) * w + x as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        g_in
    }

    /// First-wins argmax over one activation plane.
    fn ref_plane_argmax(plane: &[f64]) -> usize {
        let mut best = 0;
        for (i, &v) in plane.iter().enumerate() {
            if v > plane[best] {
                best = i;
            }
        }
        best
    }

    /// Recomputes the backward chain from the logit to the second conv
    /// block's output with explicit loops, rescanning every pooling argmax
    /// from the forward activations instead of reusing recorded indices.
    fn ref_chain_to_second_block(params: &NetParams, image: &Tensor, guided: bool) -> Vec<f64> {
        let cache = forward_pass(params, image, RunMode::Eval, &[], 0).unwrap();
        let mut g = vec![1.0];
        for i in (0..params.linears.len()).rev() {
            g = ref_linear_grad_in(cache.head_inputs[i].len(), &params.linears[i].weights, &g);
            if i > 0 {
                for (u, z) in g.iter_mut().zip(&cache.head_pre_act[i - 1]) {
                    if *z <= 0.0 || (guided && *u < 0.0) {
                        *u = 0.0;
                    }
                }
            }
        }

        let n = params.convs.len();
        let last_pre = &cache.conv_pre_relu[n - 1];
        let (mh, mw) = (last_pre.shape()[1], last_pre.shape()[2]);
        let mut d_act = vec![0.0; last_pre.len()];
        for (ch, &gc) in g.iter().enumerate() {
            let act: Vec<f64> = last_pre.values()[ch * mh * mw..(ch + 1) * mh * mw]
                .iter()
                .map(|v| v.max(0.0))
                .collect();
            d_act[ch * mh * mw + ref_plane_argmax(&act)] += gc;
        }

        for i in (2..n).rev() {
            let pre = &cache.conv_pre_relu[i];
            for (u, z) in d_act.iter_mut().zip(pre.values()) {
                if *z <= 0.0 || (guided && *u < 0.0) {
                    *u = 0.0;
                }
            }
            let (h, w) = (pre.shape()[1], pre.shape()[2]);
            let g_in = ref_conv_grad_in(&params.convs[i], h, w, &d_act);
            if i == 2 {
                return g_in;
            }
            // Scatter through the 2x2 pool below, rescanning its winners.
            let below = &cache.conv_pre_relu[i - 1];
            let (bh, bw) = (below.shape()[1], below.shape()[2]);
            let mut scattered = vec![0.0; below.len()];
            for ch in 0..below.shape()[0] {
                let act: Vec<f64> = below.values()[ch * bh * bw..(ch + 1) * bh * bw]
                    .iter()
                    .map(|v| v.max(0.0))
                    .collect();
                for py in 0..bh / 2 {
                    for px in 0..bw / 2 {
                        let base = 2 * py * bw + 2 * px;
                        let mut win = base;
                        for off in [1, bw, bw + 1] {
                            if act[base + off] > act[win] {
                                win = base + off;
                            }
                        }
                        scattered[ch * bh * bw + win] +=
                            g_in[(ch * (bh / 2) + py) * (bw / 2) + px];
                    }
                }
            }
            d_act = scattered;
        }
        unreachable!("chain always terminates at block index 2");
    }

    /// Runs the reference chain through the same reduction the module uses.
    fn ref_guided_map(params: &NetParams, image: &Tensor, guided: bool) -> Vec<f64> {
        let grad = ref_chain_to_second_block(params, image, guided);
        let cache = forward_pass(params, image, RunMode::Eval, &[], 0).unwrap();
        let second_out = &cache.conv_inputs[2];
        let (channels, gh, gw) = (
            second_out.shape()[0],
            second_out.shape()[1],
            second_out.shape()[2],
        );
        let mut map = vec![0.0; gh * gw];
        for ch in 0..channels {
            for (m, &v) in map.iter_mut().zip(&grad[ch * gh * gw..(ch + 1) * gh * gw]) {
                *m = f64::max(*m, v.abs());
            }
        }
        let side = image.shape()[1];
        let mut up = bilinear_upsample(&map, gw, gh, side, side).unwrap();
        min_max_normalize(&mut up);
        up
    }

    // ---- upsampling ----

    #[test]
    fn upsample_reproduces_corners_and_hits_midpoints() {
        let out = bilinear_upsample(&[0.0, 1.0, 2.0, 3.0], 2, 2, 3, 3).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[2], 1.0);
        assert_eq!(out[6], 2.0);
        assert_eq!(out[8], 3.0);
        assert_eq!(out[4], 1.5); // center = mean of the four corners
        assert_eq!(out[1], 0.5);
        assert_eq!(out[3], 1.0);
        assert_eq!(out[5], 2.0);
        assert_eq!(out[7], 2.5);
    }

    #[test]
    fn upsample_to_the_same_size_is_the_identity() {
        let mut rng = derive_rng(3, &[72]);
        let vals: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        let out = bilinear_upsample(&vals, 4, 3, 4, 3).unwrap();
        assert_eq!(out, vals);
    }

    #[test]
    fn upsample_keeps_constants_constant() {
        let out = bilinear_upsample(&[0.7; 6], 3, 2, 7, 5).unwrap();
        assert_eq!(out.len(), 35);
        for v in out {
            assert!((v - 0.7).abs() < EPS);
        }
    }

    #[test]
    fn upsample_rejects_shrinking_and_bad_payloads() {
        assert!(bilinear_upsample(&[0.0; 16], 4, 4, 3, 5).is_err());
        assert!(bilinear_upsample(&[0.0; 16], 4, 4, 5, 3).is_err());
        assert!(bilinear_upsample(&[0.0; 15], 4, 4, 8, 8).is_err());
        assert!(bilinear_upsample(&[], 0, 0, 4, 4).is_err());
    }

    // ---- map container ----

    #[test]
    fn gray8_quantization_and_raster_conversion() {
        let map = SaliencyMap::from_values(2, 2, vec![0.0, 0.5, 0.25, 1.0]).unwrap();
        assert_eq!(map.to_gray8(), vec![0, 128, 64, 255]);
        let raster = map.to_phase_image().unwrap();
        assert_eq!(raster.values(), map.values());

        let odd = SaliencyMap::from_values(3, 1, vec![0.0, 0.1, 0.2]).unwrap();
        assert!(odd.to_phase_image().is_err()); // non-power-of-two side

        assert!(SaliencyMap::from_values(2, 2, vec![0.0; 3]).is_err());
        assert!(SaliencyMap::from_values(2, 2, vec![0.0, 0.0, 0.0, f64::NAN]).is_err());
        assert!(SaliencyMap::from_values(0, 2, vec![]).is_err());
    }

    #[test]
    fn normalization_spans_the_unit_interval_or_zeroes_constants() {
        let mut v = vec![2.0, 4.0, 3.0];
        assert!(min_max_normalize(&mut v));
        assert_eq!(v, vec![0.0, 1.0, 0.5]);

        let mut flat = vec![5.0; 4];
        assert!(!min_max_normalize(&mut flat));
        assert_eq!(flat, vec![0.0; 4]);
    }

    // ---- class-activation maps ----

    #[test]
    fn cam_follows_the_single_channel_the_head_reads() {
        let mut params = init_custom_params(21, InputMode::Phase, &[3, 5], &[1]).unwrap();
        params.linears[0].weights = vec![0.0, 0.0, 0.0, 0.7, 0.0];
        let image = random_image(8, 21);
        let cam = cam_map(&params, &image).unwrap();

        // By hand: channel 3's clamped activation map through the same
        // upsample-and-normalize tail.
        let cache = forward_pass(&params, &image, RunMode::Eval, &[], 0).unwrap();
        let last_pre = cache.conv_pre_relu.last().unwrap();
        let (mh, mw) = (last_pre.shape()[1], last_pre.shape()[2]);
        let plane: Vec<f64> = last_pre.values()[3 * mh * mw..4 * mh * mw]
            .iter()
            .map(|v| v.max(0.0))
            .collect();
        let mut expected = bilinear_upsample(&plane, mw, mh, 8, 8).unwrap();
        min_max_normalize(&mut expected);

        assert!(!cam.degenerate());
        for (a, b) in cam.values().iter().zip(&expected) {
            assert!((a - b).abs() < EPS);
        }
    }

    #[test]
    fn cam_channel_weights_match_a_hand_chain_rule() {
        for seed in 0..5u64 {
            let params = init_custom_params(40 + seed, InputMode::Phase, &[2, 4], &[3, 1]).unwrap();
            let image = random_image(8, 40 + seed);
            let cache = forward_pass(&params, &image, RunMode::Eval, &[], 0).unwrap();
            let got = head_logit_gradient(&params, &cache, false);

            // d logit / d feature_c = sum_j W2[j] * 1(pre1_j > 0) * W1[j][c]
            let w1 = &params.linears[0].weights;
            let w2 = &params.linears[1].weights;
            let pre1 = &cache.head_pre_act[0];
            for c in 0..4 {
                let mut hand = 0.0;
                for j in 0..3 {
                    if pre1[j] > 0.0 {
                        hand += w2[j] * w1[j * 4 + c];
                    }
                }
                assert!((got[c] - hand).abs() < EPS, "seed {seed} channel {c}");
            }
        }
    }

    #[test]
    fn constant_input_through_pointwise_convs_degenerates_to_zero() {
        let mut params = init_custom_params(8, InputMode::Phase, &[3, 5], &[4, 1]).unwrap();
        keep_center_taps_only(&mut params);
        let image = Tensor::new(vec![1, 8, 8], vec![0.7; 64]).unwrap();
        let cam = cam_map(&params, &image).unwrap();
        assert!(cam.degenerate());
        assert!(cam.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_head_weights_flag_a_degenerate_map() {
        let mut params = init_custom_params(9, InputMode::Phase, &[2, 3], &[2, 1]).unwrap();
        for lin in params.linears.iter_mut() {
            lin.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let cam = cam_map(&params, &random_image(8, 9)).unwrap();
        assert!(cam.degenerate());
        assert!(cam.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cam_argmax_lands_on_an_off_center_blob() {
        // Pointwise positive convs and a positive head make the activation
        // maps track the input, so the map must peak at the blob.
        let mut params = init_custom_params(11, InputMode::Phase, &[2, 3, 4], &[3, 1]).unwrap();
        keep_center_taps_only(&mut params);
        for conv in params.convs.iter_mut() {
            conv.weights.iter_mut().for_each(|w| {
                if *w != 0.0 {
                    *w = w.abs() + 0.05;
                }
            });
        }
        for lin in params.linears.iter_mut() {
            lin.weights.iter_mut().for_each(|w| *w = w.abs() + 0.05);
        }

        let mut vals = vec![0.0; 16 * 16];
        for y in 4..=6 {
            for x in 9..=11 {
                vals[y * 16 + x] = 1.0;
            }
        }
        let image = Tensor::new(vec![1, 16, 16], vals).unwrap();
        let cam = cam_map(&params, &image).unwrap();
        assert!(!cam.degenerate());
        let peak = cam
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let (px, py) = (peak % 16, peak / 16);
        assert!(
            px.abs_diff(10) <= 2 && py.abs_diff(5) <= 2,
            "peak at ({px}, {py}), blob at (10, 5)"
        );
    }

    // ---- guided backpropagation ----

    #[test]
    fn all_positive_network_makes_guided_equal_plain_backprop() {
        let mut params = init_custom_params(30, InputMode::Phase, &[2, 3, 4], &[2, 1]).unwrap();
        for conv in params.convs.iter_mut() {
            conv.weights.iter_mut().for_each(|w| *w = w.abs() + 0.01);
        }
        for lin in params.linears.iter_mut() {
            lin.weights.iter_mut().for_each(|w| *w = w.abs() + 0.01);
        }
        let mut rng = derive_rng(30, &[73]);
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(0.1..1.0)).collect();
        let image = Tensor::new(vec![1, 8, 8], vals).unwrap();

        let got = guided_backprop(&params, &image).unwrap();
        let plain = ref_guided_map(&params, &image, false);
        for (a, b) in got.values().iter().zip(&plain) {
            assert!((a - b).abs() < EPS);
        }
    }

    #[test]
    fn guided_map_matches_the_gated_chain_reference() {
        for seed in 0..5u64 {
            let params =
                init_custom_params(60 + seed, InputMode::Phase, &[2, 3, 4], &[3, 1]).unwrap();
            let image = random_image(8, 60 + seed);
            let got = guided_backprop(&params, &image).unwrap();
            let expected = ref_guided_map(&params, &image, true);
            for (a, b) in got.values().iter().zip(&expected) {
                assert!((a - b).abs() < EPS, "seed {seed}");
            }
        }
    }

    #[test]
    fn negative_backward_signal_is_silenced() {
        // The only path through the head carries a negative weight, so the
        // guided gate at the head's ReLU kills the whole backward signal.
        let mut params = init_custom_params(31, InputMode::Phase, &[2, 3, 4], &[2, 1]).unwrap();
        params.linears[1].weights = vec![-1.0, 0.0];
        let image = random_image(8, 31);
        let guided = guided_backprop(&params, &image).unwrap();
        assert!(guided.degenerate());
        assert!(guided.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn guided_backprop_needs_three_conv_blocks() {
        let params = init_custom_params(32, InputMode::Phase, &[2, 3], &[2, 1]).unwrap();
        let err = guided_backprop(&params, &random_image(8, 32)).unwrap_err();
        assert!(err.to_string().contains("three conv blocks"));
    }

    // ---- pointwise product ----

    #[test]
    fn all_ones_cam_passes_the_guided_map_through() {
        let guided =
            SaliencyMap::from_values(2, 2, vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let ones = SaliencyMap::from_values(2, 2, vec![1.0; 4]).unwrap();
        let product = grad_cam(&ones, &guided).unwrap();
        assert_eq!(product.values(), guided.values());
        assert!(!product.degenerate());
    }

    #[test]
    fn zero_factor_annihilates_the_product() {
        let zeros = SaliencyMap::from_values(2, 2, vec![0.0; 4]).unwrap();
        let other = SaliencyMap::from_values(2, 2, vec![0.1, 0.9, 0.4, 1.0]).unwrap();
        let product = grad_cam(&zeros, &other).unwrap();
        assert!(product.degenerate());
        assert!(product.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn product_matches_the_elementwise_oracle_before_normalization() {
        let mut rng = derive_rng(5, &[74]);
        let a: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let ma = SaliencyMap::from_values(4, 4, a.clone()).unwrap();
        let mb = SaliencyMap::from_values(4, 4, b.clone()).unwrap();
        let product = grad_cam(&ma, &mb).unwrap();

        let mut expected: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        min_max_normalize(&mut expected);
        assert_eq!(product.values(), expected.as_slice());
    }

    #[test]
    fn mismatched_map_shapes_are_rejected() {
        let a = SaliencyMap::from_values(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let b = SaliencyMap::from_values(4, 1, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        assert!(grad_cam(&a, &b).is_err());
    }
}
