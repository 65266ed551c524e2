//! Render the HSV visualization of a synthetic flow field.
//!
//! Generates a smoothed texture, shifts it by (3, 1) pixels, estimates the
//! dense flow, and writes `flow.png` plus a `.flo` dump into ./target.
//!
//!     cargo run --release --example flow_visualization

use spermflow::flow::{estimate_flow, flow_to_rgb, write_flo, FarnebackParams};
use spermflow::synthetic::{shift_wrap, smoothed_noise};

fn main() -> spermflow::Result<()> {
    let prev = smoothed_noise(256, 256, 2.5, 42);
    let next = shift_wrap(&prev, 3, 1);

    let flow = estimate_flow(&prev, &next, &FarnebackParams::default(), None)?;
    let (mu, mv) = flow.median();
    println!("median flow: ({mu:.3}, {mv:.3}) px, expected (3, 1)");

    let img = flow_to_rgb(&flow);
    let out = std::path::Path::new("target/flow.png");
    std::fs::create_dir_all("target").ok();
    image::RgbImage::from_raw(img.width as u32, img.height as u32, img.data)
        .expect("buffer")
        .save(out)
        .expect("png encode");
    write_flo(&flow, std::path::Path::new("target/flow.flo"))?;
    println!("wrote target/flow.png and target/flow.flo");
    Ok(())
}
