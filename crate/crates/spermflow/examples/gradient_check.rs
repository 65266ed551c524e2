//! Central finite-difference checks for every layer and the tiny full model,
//! all in double precision.
//!
//!     cargo run --release --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spermflow::nn::gradcheck::{central_diff, max_rel_error, model_param_gradcheck};
use spermflow::nn::{build_model, ops, HeadKind, Mode, ModelConfig, Tensor, Variant};

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> spermflow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(123);

    // conv2d input gradient
    let x = rand_tensor(&[2, 3, 6, 6], &mut rng);
    let w = rand_tensor(&[4, 3, 3, 3], &mut rng);
    let seed = rand_tensor(&[2, 4, 3, 3], &mut rng);
    let (dx, dw) = ops::conv2d_backward(&x, &w, &seed, 2, 1)?;
    let (xc, wc, sc) = (x.clone(), w.clone(), seed.clone());
    let num_dx = central_diff(x.data(), 1e-3, |vals| {
        let xt = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
        let y = ops::conv2d(&xt, &wc, 2, 1).unwrap();
        y.data().iter().zip(sc.data()).map(|(a, b)| a * b).sum()
    });
    let num_dw = central_diff(w.data(), 1e-3, |vals| {
        let wt = Tensor::from_vec(wc.shape(), vals.to_vec()).unwrap();
        let y = ops::conv2d(&xc, &wt, 2, 1).unwrap();
        y.data().iter().zip(sc.data()).map(|(a, b)| a * b).sum()
    });
    println!(
        "conv2d      max rel err: input {:.2e}, weight {:.2e}",
        max_rel_error(dx.data(), &num_dx),
        max_rel_error(dw.data(), &num_dw)
    );

    // full tiny model (M2 head, fixed dropout masks)
    let config = ModelConfig {
        variant: Variant::Tiny,
        head: HeadKind::M2,
        ..ModelConfig::default()
    };
    let mut model = build_model::<f64>(&config, 5)?;
    model.set_mode(Mode::Train);
    let input = rand_tensor(&[2, 9, 16, 16], &mut rng);
    let proj = rand_tensor(&[2, 3], &mut rng);
    let report = model_param_gradcheck(&mut model, &input, &proj, 1e-3)?;
    println!(
        "full model  max rel err: {:.2e} over {} parameters (worst: {})",
        report.max_rel_error, report.params_checked, report.worst_param
    );
    Ok(())
}
