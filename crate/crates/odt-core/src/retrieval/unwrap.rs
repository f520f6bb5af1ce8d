//! Quality-guided phase unwrapping.
//!
//! Interferometric phase arrives modulo 2π; reconstruction needs the
//! continuous surface. The guided flood fill settles pixels in descending
//! quality order: starting from the most trustworthy pixel, each newcomer is
//! offset by the whole number of turns that minimizes its jump against the
//! already-settled neighbor it grew from. Reliable regions therefore fix the
//! turn counts before noisy ones get a vote, which is what keeps a single
//! bad patch from derailing the rest of the image.
//!
//! Quality is the caller's amplitude image when available (dim fringes mean
//! unreliable phase); otherwise it falls back to local smoothness of the
//! wrapped gradient. The operation never fails — garbage regions settle
//! last and congruence with the input is preserved pixel for pixel, so
//! failure shows up as the characteristic patchwork artifact rather than an
//! error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{OdtError, Result};
use crate::field::{wrap_angle, PhaseImage, TAU};

/// One frontier pixel waiting to be settled, ordered by quality with index
/// ties broken low-first so growth is deterministic.
struct Candidate {
    quality: f64,
    index: usize,
    /// Settled neighbor that proposed this pixel; its value anchors the
    /// turn-count choice.
    anchor: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.quality
            .partial_cmp(&other.quality)
            .expect("quality values are finite by construction")
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn for_each_neighbor(p: usize, w: usize, h: usize, mut f: impl FnMut(usize)) {
    let (x, y) = (p % w, p / w);
    if x > 0 {
        f(p - 1);
    }
    if x + 1 < w {
        f(p + 1);
    }
    if y > 0 {
        f(p - w);
    }
    if y + 1 < h {
        f(p + w);
    }
}

/// Fallback quality: negated mean squared wrapped gradient against the
/// available neighbors. Smooth regions score near zero, noisy ones strongly
/// negative; the mean keeps edge pixels comparable to interior ones.
fn smoothness_quality(values: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    for p in 0..values.len() {
        let mut energy = 0.0;
        let mut count = 0u32;
        for_each_neighbor(p, w, h, |nb| {
            let d = wrap_angle(values[nb] - values[p]);
            energy += d * d;
            count += 1;
        });
        out.push(-(energy / count as f64));
    }
    out
}

/// Unwraps `wrapped` (radians in (−π, π]) into a continuous phase surface.
///
/// The seed pixel keeps its wrapped value, so the output matches the input
/// exactly wherever no turns need to be added; everywhere it stays congruent
/// to the input modulo 2π. `quality` supplies the growth order (amplitude,
/// typically); without it the wrapped-gradient smoothness is used.
pub fn unwrap_phase(wrapped: &PhaseImage, quality: Option<&PhaseImage>) -> Result<PhaseImage> {
    let (w, h) = (wrapped.width(), wrapped.height());
    if let Some(q) = quality {
        if q.width() != w || q.height() != h {
            return Err(OdtError::validation(format!(
                "quality map is {}x{}, wrapped phase is {}x{}",
                q.width(),
                q.height(),
                w,
                h
            )));
        }
    }
    // In-range values pass through wrap_angle bit-identically, so this only
    // touches inputs that violate the wrapped-phase convention.
    let values: Vec<f64> = wrapped.values().iter().map(|&v| wrap_angle(v)).collect();
    let score: Vec<f64> = match quality {
        Some(q) => q.values().to_vec(),
        None => smoothness_quality(&values, w, h),
    };

    let mut seed = 0usize;
    for (i, &s) in score.iter().enumerate() {
        if s > score[seed] {
            seed = i;
        }
    }

    let n = w * h;
    let mut out = vec![0.0f64; n];
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(4 * (w + h));
    out[seed] = values[seed];
    done[seed] = true;
    for_each_neighbor(seed, w, h, |nb| {
        heap.push(Candidate { quality: score[nb], index: nb, anchor: seed });
    });

    while let Some(c) = heap.pop() {
        let p = c.index;
        if done[p] {
            // Lazy deletion: a better-anchored entry already settled it.
            continue;
        }
        let turns = ((out[c.anchor] - values[p]) / TAU).round();
        // turns == 0 keeps the stored value bitwise; adding 0.0 would not
        // (it normalizes a negative zero).
        out[p] = if turns == 0.0 { values[p] } else { values[p] + TAU * turns };
        done[p] = true;
        for_each_neighbor(p, w, h, |nb| {
            if !done[nb] {
                heap.push(Candidate { quality: score[nb], index: nb, anchor: p });
            }
        });
    }

    Ok(PhaseImage::from_parts(w, h, out))
}
