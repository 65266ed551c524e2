//! Slow, independent oracles for checking the flow estimator. Nothing here
//! shares code with the Farnebäck path.

use crate::media::GrayFrame;

/// Exhaustive integer block matching over the whole interior region.
///
/// Returns the integer (dx, dy) in `[-max_shift, max_shift]^2` minimizing
/// the sum of squared differences between `prev` interior pixels and `next`
/// sampled at the shifted position. Ties resolve to the first minimum in
/// scan order.
pub fn integer_block_match(
    prev: &GrayFrame,
    next: &GrayFrame,
    max_shift: i32,
    margin: usize,
) -> (i32, i32) {
    assert_eq!((prev.width, prev.height), (next.width, next.height));
    let w = prev.width as i32;
    let h = prev.height as i32;
    let m = margin as i32;
    assert!(m > max_shift, "margin must exceed max_shift");

    let mut best = (0i32, 0i32);
    let mut best_ssd = f64::INFINITY;
    for dy in -max_shift..=max_shift {
        for dx in -max_shift..=max_shift {
            let mut ssd = 0.0f64;
            for y in m..h - m {
                for x in m..w - m {
                    let a = prev.data[(y * w + x) as usize];
                    let b = next.data[((y + dy) * w + (x + dx)) as usize];
                    let d = (a - b) as f64;
                    ssd += d * d;
                }
            }
            if ssd < best_ssd {
                best_ssd = ssd;
                best = (dx, dy);
            }
        }
    }
    best
}
