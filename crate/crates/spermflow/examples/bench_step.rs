//! Rough timing of the training hot path (not shipped docs material).
//!
//!     cargo run --release --example bench_step

use std::time::Instant;

use spermflow::nn::{build_model, HeadKind, Mode, ModelConfig, Tensor, Variant};
use spermflow::train::{adam_step_model, mse_loss, AdamHyper, AdamState};

fn main() {
    let cfg = ModelConfig {
        variant: Variant::Tiny,
        head: HeadKind::M2,
        ..ModelConfig::default()
    };
    let mut model = build_model::<f32>(&cfg, 1).unwrap();
    model.set_mode(Mode::Train);
    let x = Tensor::from_vec(
        &[1, 9, 256, 256],
        (0..9 * 65536).map(|i| (i % 101) as f32 / 101.0).collect(),
    )
    .unwrap();
    let y = Tensor::from_vec(&[1, 3], vec![50.0, 30.0, 20.0]).unwrap();

    // warmup
    let out = model.forward(&x).unwrap();
    let (_, grad) = mse_loss(&out, &y).unwrap();
    model.backward(&grad).unwrap();

    let t0 = Instant::now();
    let n = 5;
    for _ in 0..n {
        let out = model.forward(&x).unwrap();
        std::hint::black_box(&out);
    }
    let fwd = t0.elapsed() / n;

    let mut adam = AdamState::new(AdamHyper::default());
    let t1 = Instant::now();
    for _ in 0..n {
        model.zero_grads();
        let out = model.forward(&x).unwrap();
        let (_, grad) = mse_loss(&out, &y).unwrap();
        model.backward(&grad).unwrap();
        adam_step_model(&mut model, &mut adam).unwrap();
    }
    let step = t1.elapsed() / n;

    model.set_mode(Mode::Eval);
    let t2 = Instant::now();
    for _ in 0..n {
        let out = model.forward(&x).unwrap();
        std::hint::black_box(&out);
    }
    let eval = t2.elapsed() / n;

    println!("train fwd: {fwd:?}   full step: {step:?}   eval fwd: {eval:?}");
    println!(
        "projected 200 epochs x (16 steps + 16 evals): {:.0?}",
        200 * (16 * step + 16 * eval)
    );
}
