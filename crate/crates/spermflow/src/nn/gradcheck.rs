//! Central finite-difference gradient checking. Everything here runs in
//! double precision; the trained models themselves stay in f32.

use super::model::{Mode, Model};
use super::tensor::Tensor;
use crate::error::Result;

/// Central differences of a scalar function at `x0`, one coordinate at a time.
pub fn central_diff<F>(x0: &[f64], step: f64, mut f: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x0.len()];
    let mut x = x0.to_vec();
    for i in 0..x0.len() {
        x[i] = x0[i] + step;
        let fp = f(&x);
        x[i] = x0[i] - step;
        let fm = f(&x);
        x[i] = x0[i];
        grad[i] = (fp - fm) / (2.0 * step);
    }
    grad
}

/// Elementwise relative error `|a - n| / max(|a|, |n|, 1)`; the unit floor
/// keeps near-zero gradients from inflating the ratio while still scaling
/// for gradients above one.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub params_checked: usize,
}

/// Full-model gradient check in train mode: for every parameter element,
/// compares the backward gradient of `loss = sum(seed * output)` against
/// central differences. The dropout RNG is re-seeded before every forward so
/// masks stay fixed across probes.
pub fn model_param_gradcheck(
    model: &mut Model<f64>,
    input: &Tensor<f64>,
    seed_proj: &Tensor<f64>,
    step: f64,
) -> Result<GradCheckReport> {
    model.set_mode(Mode::Train);

    // Analytic gradients.
    model.reset_dropout_rng(0xD0D0);
    model.zero_grads();
    let out = model.forward(input)?;
    assert_eq!(out.shape(), seed_proj.shape());
    model.backward(seed_proj)?;

    let mut names = Vec::new();
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    model.visit_params(&mut |name, t| {
        names.push(name.to_string());
        analytic.push(t.grad().expect("grad allocated").to_vec());
    });

    let mut worst = 0.0f64;
    let mut worst_param = String::new();
    let mut checked = 0usize;

    for (pi, name) in names.iter().enumerate() {
        // Snapshot this parameter.
        let mut base = Vec::new();
        model.visit_params(&mut |n, t| {
            if n == name {
                base = t.data().to_vec();
            }
        });
        let numeric = central_diff(&base, step, |vals| {
            model.visit_params(&mut |n, t| {
                if n == name {
                    t.data_mut().copy_from_slice(vals);
                }
            });
            model.reset_dropout_rng(0xD0D0);
            let y = model.forward(input).expect("forward");
            y.data()
                .iter()
                .zip(seed_proj.data())
                .map(|(a, s)| a * s)
                .sum()
        });
        // Restore.
        model.visit_params(&mut |n, t| {
            if n == name {
                t.data_mut().copy_from_slice(&base);
            }
        });
        let err = max_rel_error(&analytic[pi], &numeric);
        checked += numeric.len();
        if err > worst {
            worst = err;
            worst_param = name.clone();
        }
    }

    Ok(GradCheckReport {
        max_rel_error: worst,
        worst_param,
        params_checked: checked,
    })
}
