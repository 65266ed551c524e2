//! Weight file round-trip and the 3-to-9 channel first-conv adaptation.
//!
//! A 3-channel model's weights are imported into a 9-channel model by tiling
//! the first conv kernels and rescaling; on an input whose channel triples
//! repeat, both models agree.
//!
//!     cargo run --release --example weights_roundtrip

use spermflow::nn::weights::{export_weights, import_weights};
use spermflow::nn::{build_model, HeadKind, Mode, ModelConfig, Tensor, Variant};

fn main() -> spermflow::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let tiny3 = ModelConfig {
        variant: Variant::Tiny,
        in_channels: 3,
        head: HeadKind::M1,
        ..ModelConfig::default()
    };
    let tiny9 = ModelConfig {
        in_channels: 9,
        ..tiny3.clone()
    };

    // exact round trip
    let mut model = build_model::<f32>(&tiny9, 7)?;
    let path = dir.path().join("model.spwt");
    export_weights(&mut model, &path)?;
    let mut clone = build_model::<f32>(&tiny9, 8)?;
    import_weights(&mut clone, &path)?;
    let (a, b) = (model.snapshot(), clone.snapshot());
    assert!(a
        .params
        .iter()
        .zip(&b.params)
        .all(|((_, x), (_, y))| x == y));
    println!("round trip: {} parameters bit-identical", model.num_params());

    // 3 -> 9 adaptation
    let mut model3 = build_model::<f32>(&tiny3, 17)?;
    let path3 = dir.path().join("model3.spwt");
    export_weights(&mut model3, &path3)?;
    let mut model9 = build_model::<f32>(&tiny9, 1)?;
    import_weights(&mut model9, &path3)?;

    let triple: Vec<f32> = (0..3 * 32 * 32).map(|i| (i % 29) as f32 / 29.0).collect();
    let mut nine = triple.clone();
    nine.extend_from_slice(&triple);
    nine.extend_from_slice(&triple);
    let x3 = Tensor::from_vec(&[1, 3, 32, 32], triple)?;
    let x9 = Tensor::from_vec(&[1, 9, 32, 32], nine)?;
    model3.set_mode(Mode::Eval);
    model9.set_mode(Mode::Eval);
    let y3 = model3.forward(&x3)?;
    let y9 = model9.forward(&x9)?;
    println!("3-channel output: {:?}", y3.data());
    println!("9-channel output: {:?}", y9.data());
    let max_diff = y3
        .data()
        .iter()
        .zip(y9.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    println!("max difference: {max_diff:.2e}");
    Ok(())
}
