//! Check flow recovery on known synthetic shifts, including the exhaustive
//! block-matching cross-check.
//!
//!     cargo run --release --example flow_shift_recovery

use spermflow::flow::{estimate_flow, reference, FarnebackParams};
use spermflow::synthetic::{shift_wrap, smoothed_noise};

fn main() -> spermflow::Result<()> {
    let params = FarnebackParams::default();
    for (dx, dy) in [(3i32, 1i32), (-2, 0), (4, -3)] {
        let prev = smoothed_noise(128, 128, 2.5, 42);
        let next = shift_wrap(&prev, dx, dy);
        let flow = estimate_flow(&prev, &next, &params, None)?;

        let margin = 16;
        let mut good = 0;
        let mut total = 0;
        for y in margin..128 - margin {
            for x in margin..128 - margin {
                let (u, v) = flow.at(x, y);
                total += 1;
                if (u - dx as f32).abs() <= 0.5 && (v - dy as f32).abs() <= 0.5 {
                    good += 1;
                }
            }
        }
        let (mu, mv) = flow.median();
        let (bu, bv) = reference::integer_block_match(&prev, &next, 6, margin);
        println!(
            "shift ({dx:>2},{dy:>2}): {:5.1}% of interior within 0.5px, median ({mu:6.3},{mv:6.3}), block match ({bu},{bv})",
            100.0 * good as f64 / total as f64
        );
    }
    Ok(())
}
