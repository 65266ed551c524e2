//! Acceptance suite: runs every criterion sequentially and prints one
//! pass/fail line each, with the stated tolerances and runtime budgets
//! checked in place.
//!
//!     cargo test --test acceptance
//!
//! The binary exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spermflow::dataset::{
    self, build_d1_sample, build_d2_sample, build_video_samples, load_labels, read_dataset,
    sample_chunk_positions, write_dataset, ChunkSpec, DatasetKind, SampleTensor, Task, CHUNK_LEN,
    DEFAULT_CHUNKS_PER_VIDEO, SAMPLE_CHANNELS, SAMPLE_SIZE,
};
use spermflow::flow::{
    estimate_flow, polynomial_expansion, reference as flow_reference, FarnebackParams,
};
use spermflow::media::{open_video, GrayFrame};
use spermflow::nn::gradcheck::{central_diff, max_rel_error, model_param_gradcheck};
use spermflow::nn::{
    build_model, ops, reference as nn_reference, HeadKind, Mode, ModelConfig, Tensor, Variant,
};
use spermflow::synthetic::{generate_fixture, shift_wrap, smoothed_noise, FixtureSpec, MovingDots};
use spermflow::train::{
    adam_update_slice, evaluate, run_cross_validation, train, AdamHyper, MetricsReport,
    TrainConfig,
};

type CriterionResult = Result<String, String>;

struct Suite {
    failures: u32,
}

impl Suite {
    fn run(
        &mut self,
        number: u8,
        name: &str,
        budget: Option<Duration>,
        f: impl FnOnce() -> CriterionResult,
    ) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(Ok(detail)) => match budget {
                Some(b) if elapsed > b => (
                    false,
                    format!("{detail}; runtime {elapsed:.1?} exceeds budget {b:.1?}"),
                ),
                _ => (true, detail),
            },
            Ok(Err(reason)) => (false, reason),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            self.failures += 1;
        }
        println!(
            "criterion {number:02} [{}] {name}: {detail} ({elapsed:.2?})",
            if ok { "PASS" } else { "FAIL" },
        );
    }
}

fn err(msg: impl Into<String>) -> CriterionResult {
    Err(msg.into())
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let work = tempfile::tempdir().expect("tempdir");

    suite.run(1, "flow zero case", Some(Duration::from_secs(1)), criterion_flow_zero);
    suite.run(2, "flow shift recovery", Some(Duration::from_secs(5)), criterion_flow_recovery);
    suite.run(3, "polynomial expansion exactness", None, criterion_poly_exact);
    suite.run(4, "gradient suite", Some(Duration::from_secs(60)), criterion_gradients);
    suite.run(5, "conv brute-force oracle", None, criterion_conv_oracle);
    suite.run(6, "adam oracle", None, criterion_adam_oracle);
    suite.run(7, "overfit fixture", Some(Duration::from_secs(600)), || {
        criterion_overfit(work.path())
    });
    suite.run(8, "dataset construction", None, || criterion_dataset(work.path()));
    suite.run(9, "determinism", None, || criterion_determinism(work.path()));
    suite.run(10, "report format", None, || criterion_report(work.path()));
    suite.run(11, "dropout statistics", None, criterion_dropout_stats);
    suite.run(12, "parameter count", None, criterion_param_count);

    if suite.failures > 0 {
        println!("{} criterion(s) FAILED", suite.failures);
        std::process::exit(1);
    }
    println!("all 12 criteria passed");
}

// ---------------------------------------------------------------------------
// 1. estimate_flow(f, f) on a 256x256 texture -> max |u|,|v| <= 1e-3
// ---------------------------------------------------------------------------

fn criterion_flow_zero() -> CriterionResult {
    let frame = smoothed_noise(256, 256, 2.5, 31);
    let flow = estimate_flow(&frame, &frame, &FarnebackParams::default(), None)
        .map_err(|e| e.to_string())?;
    let max = flow
        .u
        .iter()
        .chain(&flow.v)
        .fold(0f32, |m, &v| m.max(v.abs()));
    if max <= 1e-3 {
        Ok(format!("max |u|,|v| = {max:.2e} <= 1e-3"))
    } else {
        err(format!("max |u|,|v| = {max:.2e} > 1e-3"))
    }
}

// ---------------------------------------------------------------------------
// 2. (3,1) wraparound shift: >= 80% of interior within 0.5 px; median agrees
//    with exhaustive integer block matching within 0.5 px
// ---------------------------------------------------------------------------

fn criterion_flow_recovery() -> CriterionResult {
    let prev = smoothed_noise(128, 128, 2.5, 42);
    let next = shift_wrap(&prev, 3, 1);
    let flow = estimate_flow(&prev, &next, &FarnebackParams::default(), None)
        .map_err(|e| e.to_string())?;
    let margin = 16usize;
    let mut good = 0usize;
    let mut total = 0usize;
    for y in margin..128 - margin {
        for x in margin..128 - margin {
            let (u, v) = flow.at(x, y);
            total += 1;
            if (u - 3.0).abs() <= 0.5 && (v - 1.0).abs() <= 0.5 {
                good += 1;
            }
        }
    }
    let frac = good as f64 / total as f64;
    let (bm_u, bm_v) = flow_reference::integer_block_match(&prev, &next, 6, margin);
    let (mu, mv) = flow.median();
    if frac < 0.8 {
        return err(format!("only {:.1}% of interior within 0.5 px", frac * 100.0));
    }
    if (mu - bm_u as f32).abs() > 0.5 || (mv - bm_v as f32).abs() > 0.5 {
        return err(format!(
            "median ({mu:.2},{mv:.2}) vs block match ({bm_u},{bm_v}) differ by > 0.5 px"
        ));
    }
    Ok(format!(
        "{:.1}% interior within 0.5 px; median ({mu:.2},{mv:.2}) vs block match ({bm_u},{bm_v})",
        frac * 100.0
    ))
}

// ---------------------------------------------------------------------------
// 3. expansion coefficients exact (<= 1e-5) on quadratic signals
// ---------------------------------------------------------------------------

fn criterion_poly_exact() -> CriterionResult {
    // f(x, y) = c + bx x + by y + axx x^2 + ayy y^2 + 2 axy x y
    let (c0, bx, by, axx, ayy, axy) = (0.2f64, 3e-3, -2e-3, 4e-4, -3e-4, 2.5e-4);
    let (w, h) = (48usize, 40usize);
    let data: Vec<f32> = (0..w * h)
        .map(|i| {
            let x = (i % w) as f64;
            let y = (i / w) as f64;
            (c0 + bx * x + by * y + axx * x * x + ayy * y * y + 2.0 * axy * x * y) as f32
        })
        .collect();
    let frame = GrayFrame::new(w, h, data).map_err(|e| e.to_string())?;
    let exp =
        polynomial_expansion(&frame, &FarnebackParams::default()).map_err(|e| e.to_string())?;
    let n = 2; // poly_n / 2
    let mut worst = 0f64;
    for y in n..h - n {
        for x in n..w - n {
            let co = exp.coeffs(x, y);
            let (xf, yf) = (x as f64, y as f64);
            // local model at (x, y): value, gradient, curvature
            let expect = [
                c0 + bx * xf + by * yf + axx * xf * xf + ayy * yf * yf + 2.0 * axy * xf * yf,
                bx + 2.0 * axx * xf + 2.0 * axy * yf,
                by + 2.0 * ayy * yf + 2.0 * axy * xf,
                axx,
                axy,
                ayy,
            ];
            for (got, want) in co.iter().zip(expect) {
                worst = worst.max((*got as f64 - want).abs());
            }
        }
    }
    if worst <= 1e-5 {
        Ok(format!("max interior coefficient error {worst:.2e} <= 1e-5"))
    } else {
        err(format!("max interior coefficient error {worst:.2e} > 1e-5"))
    }
}

// ---------------------------------------------------------------------------
// 4. finite-difference gradient checks, per layer < 1e-4, full model < 1e-3
// ---------------------------------------------------------------------------

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values on a separated grid: all pairwise gaps and |value| exceed 5e-3 so
/// finite differences at step 1e-3 never cross a relu/max kink.
fn separated_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut levels: Vec<usize> = (0..n).collect();
    levels.shuffle(rng);
    let data: Vec<f64> = levels
        .into_iter()
        .map(|l| ((l as f64 + 0.5) / n as f64) * 2.0 - 1.0)
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

fn proj_loss(y: &Tensor<f64>, seed: &Tensor<f64>) -> f64 {
    y.data().iter().zip(seed.data()).map(|(a, b)| a * b).sum()
}

fn criterion_gradients() -> CriterionResult {
    let step = 1e-3;
    let tol_layer = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let mut report = Vec::new();

    // conv2d: input and weight
    {
        let x = rand_tensor(&[2, 3, 6, 6], &mut rng);
        let w = rand_tensor(&[4, 3, 3, 3], &mut rng);
        let seed = rand_tensor(&[2, 4, 3, 3], &mut rng);
        let (dx, dw) = ops::conv2d_backward(&x, &w, &seed, 2, 1).map_err(|e| e.to_string())?;
        let (xc, wc, sc) = (x.clone(), w.clone(), seed.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::conv2d(&t, &wc, 2, 1).unwrap(), &sc)
        });
        let ndw = central_diff(w.data(), step, |vals| {
            let t = Tensor::from_vec(wc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::conv2d(&xc, &t, 2, 1).unwrap(), &sc)
        });
        let e = max_rel_error(dx.data(), &ndx).max(max_rel_error(dw.data(), &ndw));
        if e >= tol_layer {
            return err(format!("conv2d rel err {e:.2e} >= 1e-4"));
        }
        report.push(format!("conv {e:.1e}"));
    }

    // batch_norm2d: input, gamma, beta
    {
        let x = rand_tensor(&[3, 2, 4, 4], &mut rng);
        let gamma = rand_tensor(&[2], &mut rng);
        let beta = rand_tensor(&[2], &mut rng);
        let seed = rand_tensor(&[3, 2, 4, 4], &mut rng);
        let fwd = |xv: &Tensor<f64>, gv: &Tensor<f64>, bv: &Tensor<f64>| {
            let mut rm = vec![0.0; 2];
            let mut rv = vec![1.0; 2];
            ops::batch_norm2d_train(xv, gv, bv, &mut rm, &mut rv, 0.1, 1e-5)
                .unwrap()
                .0
        };
        let (_, cache) = {
            let mut rm = vec![0.0; 2];
            let mut rv = vec![1.0; 2];
            ops::batch_norm2d_train(&x, &gamma, &beta, &mut rm, &mut rv, 0.1, 1e-5)
                .map_err(|e| e.to_string())?
        };
        let (dx, dg, db) =
            ops::batch_norm2d_backward(&seed, &cache, &gamma).map_err(|e| e.to_string())?;
        let (xc, gc, bc, sc) = (x.clone(), gamma.clone(), beta.clone(), seed.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
            proj_loss(&fwd(&t, &gc, &bc), &sc)
        });
        let ndg = central_diff(gamma.data(), step, |vals| {
            let t = Tensor::from_vec(&[2], vals.to_vec()).unwrap();
            proj_loss(&fwd(&xc, &t, &bc), &sc)
        });
        let ndb = central_diff(beta.data(), step, |vals| {
            let t = Tensor::from_vec(&[2], vals.to_vec()).unwrap();
            proj_loss(&fwd(&xc, &gc, &t), &sc)
        });
        let e = max_rel_error(dx.data(), &ndx)
            .max(max_rel_error(&dg, &ndg))
            .max(max_rel_error(&db, &ndb));
        if e >= tol_layer {
            return err(format!("batch_norm2d rel err {e:.2e} >= 1e-4"));
        }
        report.push(format!("bn {e:.1e}"));
    }

    // linear: input, weight, bias
    {
        let x = rand_tensor(&[3, 5], &mut rng);
        let w = rand_tensor(&[4, 5], &mut rng);
        let b = rand_tensor(&[4], &mut rng);
        let seed = rand_tensor(&[3, 4], &mut rng);
        let (dx, dw, db) = ops::linear_backward(&x, &w, &seed).map_err(|e| e.to_string())?;
        let (xc, wc, bc, sc) = (x.clone(), w.clone(), b.clone(), seed.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::linear(&t, &wc, &bc).unwrap(), &sc)
        });
        let ndw = central_diff(w.data(), step, |vals| {
            let t = Tensor::from_vec(wc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::linear(&xc, &t, &bc).unwrap(), &sc)
        });
        let ndb = central_diff(b.data(), step, |vals| {
            let t = Tensor::from_vec(bc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::linear(&xc, &wc, &t).unwrap(), &sc)
        });
        let e = max_rel_error(dx.data(), &ndx)
            .max(max_rel_error(dw.data(), &ndw))
            .max(max_rel_error(&db, &ndb));
        if e >= tol_layer {
            return err(format!("linear rel err {e:.2e} >= 1e-4"));
        }
        report.push(format!("linear {e:.1e}"));
    }

    // max_pool2d 3x3/2 and adaptive_avg_pool
    {
        let x = separated_tensor(&[1, 2, 7, 7], &mut rng);
        let seed = rand_tensor(&[1, 2, 3, 3], &mut rng);
        let (_, argmax) = ops::max_pool2d(&x, 3, 2, 1).map_err(|e| e.to_string())?;
        let dx = ops::max_pool2d_backward(&seed, &argmax, x.shape()).map_err(|e| e.to_string())?;
        let (xc, sc) = (x.clone(), seed.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::max_pool2d(&t, 3, 2, 1).unwrap().0, &sc)
        });
        let e_pool = max_rel_error(dx.data(), &ndx);
        if e_pool >= tol_layer {
            return err(format!("max_pool2d rel err {e_pool:.2e} >= 1e-4"));
        }

        let seed_avg = rand_tensor(&[1, 2, 1, 1], &mut rng);
        let davg =
            ops::adaptive_avg_pool_backward(&seed_avg, x.shape()).map_err(|e| e.to_string())?;
        let sc2 = seed_avg.clone();
        let xc2 = x.clone();
        let ndavg = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc2.shape(), vals.to_vec()).unwrap();
            proj_loss(&ops::adaptive_avg_pool(&t).unwrap(), &sc2)
        });
        let e_avg = max_rel_error(davg.data(), &ndavg);
        if e_avg >= tol_layer {
            return err(format!("adaptive_avg_pool rel err {e_avg:.2e} >= 1e-4"));
        }
        report.push(format!("pool {:.1e}", e_pool.max(e_avg)));
    }

    // dropout with the mask held fixed
    {
        let x = rand_tensor(&[64], &mut rng);
        let seed = rand_tensor(&[64], &mut rng);
        let (_, mask) = ops::dropout(&x, 0.4, &mut rng).map_err(|e| e.to_string())?;
        let dx = ops::dropout_backward(&seed, &mask).map_err(|e| e.to_string())?;
        let (sc, mc) = (seed.clone(), mask.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            vals.iter()
                .zip(&mc)
                .zip(sc.data())
                .map(|((v, m), s)| v * m * s)
                .sum()
        });
        let e = max_rel_error(dx.data(), &ndx);
        if e >= tol_layer {
            return err(format!("dropout rel err {e:.2e} >= 1e-4"));
        }
        report.push(format!("dropout {e:.1e}"));
    }

    // residual block: input gradient through both branches
    {
        use spermflow::nn::layers::BasicBlock;
        let x = rand_tensor(&[2, 4, 6, 6], &mut rng);
        let seed = rand_tensor(&[2, 8, 3, 3], &mut rng);
        let mut block = BasicBlock::<f64>::new(4, 8, 2, &mut rng);
        let _ = block.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
        let dx = block.backward(&seed).map_err(|e| e.to_string())?;
        let (xc, sc) = (x.clone(), seed.clone());
        let ndx = central_diff(x.data(), step, |vals| {
            let t = Tensor::from_vec(xc.shape(), vals.to_vec()).unwrap();
            let mut b = block.clone();
            proj_loss(&b.forward(&t, Mode::Train).unwrap(), &sc)
        });
        let e = max_rel_error(dx.data(), &ndx);
        if e >= tol_layer {
            return err(format!("residual block rel err {e:.2e} >= 1e-4"));
        }
        report.push(format!("block {e:.1e}"));
    }

    // tiny full model in double precision, every parameter element
    {
        let config = ModelConfig {
            variant: Variant::Tiny,
            head: HeadKind::M2,
            mlp_widths: vec![32, 16],
            dropout_probs: vec![0.5, 0.5],
            ..ModelConfig::default()
        };
        let mut model = build_model::<f64>(&config, 5).map_err(|e| e.to_string())?;
        let input = rand_tensor(&[2, 9, 16, 16], &mut rng);
        let proj = rand_tensor(&[2, 3], &mut rng);
        let gc = model_param_gradcheck(&mut model, &input, &proj, step)
            .map_err(|e| e.to_string())?;
        if gc.max_rel_error >= 1e-3 {
            return err(format!(
                "full model rel err {:.2e} >= 1e-3 (worst {})",
                gc.max_rel_error, gc.worst_param
            ));
        }
        report.push(format!(
            "full-model {:.1e} over {} params",
            gc.max_rel_error, gc.params_checked
        ));
    }

    Ok(format!("max rel errors: {}", report.join(", ")))
}

// ---------------------------------------------------------------------------
// 5. conv2d vs brute force on 20 random small shapes, within 1e-6
// ---------------------------------------------------------------------------

fn criterion_conv_oracle() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0f64;
    for case in 0..20 {
        let n = rng.random_range(1..=2);
        let c = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let kh = rng.random_range(1..=3);
        let kw = rng.random_range(1..=3);
        let h = rng.random_range(kh..=kh + 7);
        let w = rng.random_range(kw..=kw + 7);
        let stride = rng.random_range(1..=2);
        let padding = rng.random_range(0..=2);
        let x = rand_tensor(&[n, c, h, w], &mut rng);
        let wt = rand_tensor(&[k, c, kh, kw], &mut rng);
        let fast = ops::conv2d(&x, &wt, stride, padding).map_err(|e| e.to_string())?;
        let slow =
            nn_reference::direct_conv2d(&x, &wt, stride, padding).map_err(|e| e.to_string())?;
        if fast.shape() != slow.shape() {
            return err(format!("case {case}: shape mismatch"));
        }
        for (a, b) in fast.data().iter().zip(slow.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    if worst <= 1e-6 {
        Ok(format!("20 shapes, max |diff| = {worst:.2e} <= 1e-6"))
    } else {
        err(format!("max |diff| = {worst:.2e} > 1e-6"))
    }
}

// ---------------------------------------------------------------------------
// 6. Adam vs hand-rolled scalar recurrence over 10 steps, within 1e-9
// ---------------------------------------------------------------------------

fn criterion_adam_oracle() -> CriterionResult {
    let hyper = AdamHyper::default();

    // zero gradient at fresh state is a no-op
    let mut p0 = [1.25f64];
    let mut m0 = [0.0f64];
    let mut v0 = [0.0f64];
    adam_update_slice(&mut p0, &[0.0], &mut m0, &mut v0, 1, &hyper);
    if p0[0] != 1.25 {
        return err("zero-gradient step moved the parameter".to_string());
    }

    // scalar quadratic f(t) = t^2, gradient 2t, against an independent
    // recurrence
    let mut param = [1.0f64];
    let mut m = [0.0f64];
    let mut v = [0.0f64];
    let (mut m_ref, mut v_ref, mut theta) = (0.0f64, 0.0f64, 1.0f64);
    let mut worst = 0f64;
    for t in 1..=10u64 {
        let g = 2.0 * param[0];
        adam_update_slice(&mut param, &[g], &mut m, &mut v, t, &hyper);

        let g_ref = 2.0 * theta;
        m_ref = 0.9 * m_ref + 0.1 * g_ref;
        v_ref = 0.999 * v_ref + 0.001 * g_ref * g_ref;
        let mh = m_ref / (1.0 - 0.9f64.powi(t as i32));
        let vh = v_ref / (1.0 - 0.999f64.powi(t as i32));
        theta -= hyper.lr * mh / (vh.sqrt() + hyper.eps);
        worst = worst.max((param[0] - theta).abs());
    }
    if worst <= 1e-9 {
        Ok(format!("10 steps, max |diff| = {worst:.2e} <= 1e-9"))
    } else {
        err(format!("max |diff| = {worst:.2e} > 1e-9"))
    }
}

// ---------------------------------------------------------------------------
// 7. overfit: 8 moving-dot videos, D2, tiny M2, 200 epochs -> train MAE < 2
// ---------------------------------------------------------------------------

fn criterion_overfit(work: &Path) -> CriterionResult {
    let root = work.join("overfit");
    let fixture = generate_fixture(&root, &FixtureSpec::default()).map_err(|e| e.to_string())?;
    let labels = load_labels(&fixture.labels_path).map_err(|e| e.to_string())?;
    let params = FarnebackParams::default();
    let mut samples = Vec::new();
    for label in &labels {
        let src =
            open_video(&fixture.videos_dir.join(&label.video_id)).map_err(|e| e.to_string())?;
        let starts =
            sample_chunk_positions(src.frame_count, 2, CHUNK_LEN).map_err(|e| e.to_string())?;
        samples.extend(
            build_video_samples(&src, label, Task::Motility, DatasetKind::D2, &params, &starts)
                .map_err(|e| e.to_string())?,
        );
    }

    let cfg = TrainConfig {
        task: Task::Motility,
        epochs: 200,
        batch_size: 1,
        seed: 11,
        lr: 0.001,
        dataset_kind: DatasetKind::D2,
        model: ModelConfig {
            variant: Variant::Tiny,
            head: HeadKind::M2,
            ..ModelConfig::default()
        },
    };
    let run = train(&cfg, &samples, &samples).map_err(|e| e.to_string())?;

    // train loss trend: means of 10-epoch windows must not grow (small slack
    // for optimizer noise)
    let windows: Vec<f64> = run
        .logs
        .chunks(10)
        .map(|w| w.iter().map(|l| l.train_mse).sum::<f64>() / w.len() as f64)
        .collect();
    for pair in windows.windows(2) {
        if pair[1] > pair[0] * 1.15 {
            return err(format!(
                "train MSE window rose from {:.3} to {:.3}",
                pair[0], pair[1]
            ));
        }
    }

    let mut model = run.model;
    let eval = evaluate(&mut model, &samples, 8).map_err(|e| e.to_string())?;
    if eval.video_mae < 2.0 {
        Ok(format!(
            "train MAE {:.3} (per chunk {:.3}) after 200 epochs",
            eval.video_mae, eval.chunk_mae
        ))
    } else {
        err(format!("train MAE {:.3} >= 2.0", eval.video_mae))
    }
}

// ---------------------------------------------------------------------------
// 8. dataset construction: 250 chunks, 9x256x256 shapes, channel ordering,
//    bit-exact round trip
// ---------------------------------------------------------------------------

fn criterion_dataset(work: &Path) -> CriterionResult {
    // 250 chunks per adequate-length video
    let starts = sample_chunk_positions(300, DEFAULT_CHUNKS_PER_VIDEO, CHUNK_LEN)
        .map_err(|e| e.to_string())?;
    if starts.len() != 250 {
        return err(format!("{} chunks instead of 250", starts.len()));
    }
    if !starts.windows(2).all(|w| w[0] <= w[1]) {
        return err("chunk starts not sorted".to_string());
    }

    // two videos differing only in frame start+10
    let root = work.join("differential");
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let base = MovingDots {
        id: "base".into(),
        width: 96,
        height: 96,
        frames: 12,
        n_dots: 4,
        speed: 1.0,
        direction: 0.6,
        seed: 5,
    };
    base.write_dir(&root).map_err(|e| e.to_string())?;
    let perturbed_dir = root.join("perturbed");
    std::fs::create_dir_all(&perturbed_dir).map_err(|e| e.to_string())?;
    for t in 0..12 {
        let name = format!("{t:06}.png");
        std::fs::copy(root.join("base").join(&name), perturbed_dir.join(&name))
            .map_err(|e| e.to_string())?;
    }
    // replace frame 10 with a visibly different frame
    let other = MovingDots {
        seed: 999,
        direction: 2.0,
        ..base.clone()
    };
    let frame10 = other.frame(3);
    image::RgbImage::from_raw(96, 96, frame10.data)
        .unwrap()
        .save(perturbed_dir.join("000010.png"))
        .map_err(|e| e.to_string())?;

    let label = dataset::LabelRecord {
        video_id: "v".into(),
        motility: [60.0, 30.0, 10.0],
        morphology: [10.0, 20.0, 30.0],
    };
    let params = FarnebackParams::default();
    let chunk = ChunkSpec {
        video_id: "v".into(),
        start_frame: 0,
        length: CHUNK_LEN,
    };
    let src_a = open_video(&root.join("base")).map_err(|e| e.to_string())?;
    let src_b = open_video(&perturbed_dir).map_err(|e| e.to_string())?;
    let d2_a = build_d2_sample(
        &src_a,
        &chunk,
        &params,
        label.target(Task::Motility),
        Task::Motility,
    )
    .map_err(|e| e.to_string())?;
    let d2_b = build_d2_sample(
        &src_b,
        &chunk,
        &params,
        label.target(Task::Motility),
        Task::Motility,
    )
    .map_err(|e| e.to_string())?;
    let d1 = build_d1_sample(&src_a, &chunk, label.target(Task::Motility), Task::Motility)
        .map_err(|e| e.to_string())?;

    for s in [&d2_a, &d2_b, &d1] {
        if s.data.len() != SAMPLE_CHANNELS * SAMPLE_SIZE * SAMPLE_SIZE {
            return err("sample not 9x256x256".to_string());
        }
        s.validate().map_err(|e| e.to_string())?;
    }

    let plane = SAMPLE_SIZE * SAMPLE_SIZE;
    if d2_a.data[..6 * plane] != d2_b.data[..6 * plane] {
        return err("channels 0-5 changed when only frame start+10 differs".to_string());
    }
    if d2_a.data[6 * plane..] == d2_b.data[6 * plane..] {
        return err("channels 6-8 did not react to frame start+10".to_string());
    }

    // write -> read bit exact
    let path = work.join("roundtrip.sprm");
    let samples = vec![d2_a, d2_b];
    write_dataset(&samples, &path, DatasetKind::D2, &params).map_err(|e| e.to_string())?;
    let (back, _, _) = read_dataset(&path).map_err(|e| e.to_string())?;
    if back != samples {
        return err("dataset round trip not bit-exact".to_string());
    }

    Ok("250 chunks, 9x256x256 shapes, channel ordering and round trip all hold".to_string())
}

// ---------------------------------------------------------------------------
// 9. determinism: same seed -> identical dataset hash, matching reports
// ---------------------------------------------------------------------------

fn sha256_of(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

fn small_cv_samples(
    work: &Path,
    task: Task,
) -> Result<(Vec<SampleTensor>, dataset::FoldAssignment), String> {
    let root = work.join(format!("cvfix_{task}"));
    let fixture = generate_fixture(
        &root,
        &FixtureSpec {
            n_videos: 6,
            frames: 13,
            width: 64,
            height: 64,
            seed: 40,
        },
    )
    .map_err(|e| e.to_string())?;
    let labels = load_labels(&fixture.labels_path).map_err(|e| e.to_string())?;
    let folds =
        dataset::assign_folds(&labels, Some(&fixture.folds_path)).map_err(|e| e.to_string())?;
    let mut samples = Vec::new();
    for label in &labels {
        let src =
            open_video(&fixture.videos_dir.join(&label.video_id)).map_err(|e| e.to_string())?;
        let starts =
            sample_chunk_positions(src.frame_count, 2, CHUNK_LEN).map_err(|e| e.to_string())?;
        samples.extend(
            build_video_samples(
                &src,
                label,
                task,
                DatasetKind::D1,
                &FarnebackParams::default(),
                &starts,
            )
            .map_err(|e| e.to_string())?,
        );
    }
    Ok((samples, folds))
}

fn tiny_cv_config(task: Task) -> TrainConfig {
    TrainConfig {
        task,
        epochs: 2,
        batch_size: 4,
        seed: 9,
        lr: 0.001,
        dataset_kind: DatasetKind::D1,
        model: ModelConfig {
            variant: Variant::Tiny,
            head: HeadKind::M1,
            ..ModelConfig::default()
        },
    }
}

fn criterion_determinism(work: &Path) -> CriterionResult {
    // dataset file hashes across two D2 preprocess runs
    let root = work.join("determinism");
    let fixture = generate_fixture(
        &root,
        &FixtureSpec {
            n_videos: 2,
            frames: 13,
            width: 64,
            height: 64,
            seed: 8,
        },
    )
    .map_err(|e| e.to_string())?;
    let labels = load_labels(&fixture.labels_path).map_err(|e| e.to_string())?;
    let params = FarnebackParams::default();
    let mut hashes = Vec::new();
    for run in 0..2 {
        let mut samples = Vec::new();
        for label in &labels {
            let src =
                open_video(&fixture.videos_dir.join(&label.video_id)).map_err(|e| e.to_string())?;
            let starts =
                sample_chunk_positions(src.frame_count, 2, CHUNK_LEN).map_err(|e| e.to_string())?;
            samples.extend(
                build_video_samples(
                    &src,
                    label,
                    Task::Motility,
                    DatasetKind::D2,
                    &params,
                    &starts,
                )
                .map_err(|e| e.to_string())?,
            );
        }
        let path = root.join(format!("run{run}.sprm"));
        write_dataset(&samples, &path, DatasetKind::D2, &params).map_err(|e| e.to_string())?;
        hashes.push(sha256_of(&path));
    }
    if hashes[0] != hashes[1] {
        return err("dataset hashes differ across identically seeded runs".to_string());
    }

    // cross-validation reports across two runs
    let (samples, folds) = small_cv_samples(work, Task::Motility)?;
    let cfg = tiny_cv_config(Task::Motility);
    let a = run_cross_validation(&cfg, &samples, &folds).map_err(|e| e.to_string())?;
    let b = run_cross_validation(&cfg, &samples, &folds).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for (ra, rb) in a.report.rows.iter().zip(&b.report.rows) {
        worst = worst.max((ra.video_mae - rb.video_mae).abs());
        worst = worst.max((ra.chunk_mae - rb.chunk_mae).abs());
    }
    if worst > 1e-6 {
        return err(format!("MetricsReport values differ by {worst:.2e} > 1e-6"));
    }
    Ok(format!(
        "dataset sha256 {} reproduced; report values match within {worst:.1e}",
        &hashes[0][..12]
    ))
}

// ---------------------------------------------------------------------------
// 10. report format: fold rows + average per cell in both task tables
// ---------------------------------------------------------------------------

fn criterion_report(work: &Path) -> CriterionResult {
    let mut reports = Vec::new();
    for task in [Task::Motility, Task::Morphology] {
        let (samples, folds) = small_cv_samples(work, task)?;
        let cfg = tiny_cv_config(task);
        let cv = run_cross_validation(&cfg, &samples, &folds).map_err(|e| e.to_string())?;
        reports.push(cv.report);
    }
    let merged = MetricsReport::merge(reports);

    // CSV: header + per cell 3 fold rows + 1 avg row, avg == mean of folds
    let csv_path = work.join("metrics.csv");
    merged.write_csv(&csv_path).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&csv_path).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    if lines[0] != "input,method,task,fold,mae" {
        return err(format!("unexpected CSV header {:?}", lines[0]));
    }
    if lines.len() != 1 + 2 * 4 {
        return err(format!(
            "expected 8 data rows (2 cells x 4), got {}",
            lines.len() - 1
        ));
    }
    for task in [Task::Motility, Task::Morphology] {
        let (avg, _) = merged
            .cell_average(DatasetKind::D1, HeadKind::M1, task)
            .ok_or("missing cell average")?;
        let folds: Vec<f64> = merged
            .rows
            .iter()
            .filter(|r| r.task == task)
            .map(|r| r.video_mae)
            .collect();
        if folds.len() != 3 {
            return err(format!("{task}: expected 3 fold rows, got {}", folds.len()));
        }
        let mean = folds.iter().sum::<f64>() / 3.0;
        if (avg - mean).abs() > 1e-9 {
            return err(format!("{task}: average {avg} != mean of folds {mean}"));
        }
    }
    // parses back, including the avg-consistency validation
    MetricsReport::read_csv(&csv_path).map_err(|e| e.to_string())?;

    let table = merged.render_tables();
    for needle in [
        "MAE -- motility",
        "MAE -- morphology",
        "Fold 1",
        "Fold 2",
        "Fold 3",
        "Average",
    ] {
        if !table.contains(needle) {
            return err(format!("rendered table lacks {needle:?}"));
        }
    }
    Ok("CSV and tables carry Fold 1-3 + Average per cell for both tasks".to_string())
}

// ---------------------------------------------------------------------------
// 11. dropout statistics at p = 0.5 over 1e4 trials
// ---------------------------------------------------------------------------

fn criterion_dropout_stats() -> CriterionResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000usize;
    let x = Tensor::from_vec(&[n], vec![1.0f64; n]).unwrap();
    let (y, mask) = ops::dropout(&x, 0.5, &mut rng).map_err(|e| e.to_string())?;
    let survivors = mask.iter().filter(|&&m| m > 0.0).count() as f64 / n as f64;
    let mean = y.data().iter().sum::<f64>() / n as f64;
    if (survivors - 0.5).abs() > 0.02 {
        return err(format!("survivor fraction {survivors:.4} outside 0.5 +/- 0.02"));
    }
    if (mean - 1.0).abs() > 0.02 {
        return err(format!("output mean {mean:.4} more than 2% from input"));
    }
    Ok(format!("survivors {survivors:.4}, mean {mean:.4}"))
}

// ---------------------------------------------------------------------------
// 12. parameter count vs an independent closed-form sum
// ---------------------------------------------------------------------------

/// Closed-form parameter count from the architecture table alone (conv
/// kernels + batch-norm affine pairs + head), independent of the Model
/// implementation.
fn analytic_param_count(
    in_channels: usize,
    stages: &[(usize, usize)],
    head_widths: &[usize],
    outputs: usize,
) -> usize {
    let stem = stages[0].0;
    let mut total = stem * in_channels * 7 * 7 + 2 * stem;
    let mut prev = stem;
    for (si, &(width, blocks)) in stages.iter().enumerate() {
        for b in 0..blocks {
            let stride = if si > 0 && b == 0 { 2 } else { 1 };
            total += width * prev * 3 * 3 + 2 * width; // conv1 + bn1
            total += width * width * 3 * 3 + 2 * width; // conv2 + bn2
            if stride != 1 || prev != width {
                total += width * prev + 2 * width; // 1x1 projection + bn
            }
            prev = width;
        }
    }
    let mut feat = prev;
    for &w in head_widths {
        total += feat * w + w;
        feat = w;
    }
    total += feat * outputs + outputs;
    total
}

fn criterion_param_count() -> CriterionResult {
    let stages34: &[(usize, usize)] = &[(64, 3), (128, 4), (256, 6), (512, 3)];

    // anchor the counting formula itself: the reference 34-layer network
    // with a 3-channel stem and 1000-way classifier has 21,797,672 params
    let anchor = analytic_param_count(3, stages34, &[], 1000);
    if anchor != 21_797_672 {
        return err(format!("analytic formula anchor {anchor} != 21797672"));
    }

    let mut m9 = build_model::<f32>(
        &ModelConfig {
            variant: Variant::Resnet34,
            in_channels: 9,
            head: HeadKind::M1,
            ..ModelConfig::default()
        },
        0,
    )
    .map_err(|e| e.to_string())?;
    let got9 = m9.num_params();
    let want9 = analytic_param_count(9, stages34, &[], 3);
    if got9 != want9 {
        return err(format!("resnet34-9ch: model {got9} != analytic {want9}"));
    }

    let mut m3 = build_model::<f32>(
        &ModelConfig {
            variant: Variant::Resnet34,
            in_channels: 3,
            head: HeadKind::M1,
            ..ModelConfig::default()
        },
        0,
    )
    .map_err(|e| e.to_string())?;
    let got3 = m3.num_params();
    let diff = got9 - got3;
    if diff != 64 * 6 * 7 * 7 {
        return err(format!("3->9 channel delta {diff} != {}", 64 * 6 * 7 * 7));
    }

    // M2 head accounted for as well
    let mut m2 = build_model::<f32>(
        &ModelConfig {
            variant: Variant::Resnet34,
            in_channels: 9,
            head: HeadKind::M2,
            ..ModelConfig::default()
        },
        0,
    )
    .map_err(|e| e.to_string())?;
    let want_m2 = analytic_param_count(9, stages34, &[256, 64], 3);
    if m2.num_params() != want_m2 {
        return err(format!(
            "resnet34-M2: model {} != analytic {want_m2}",
            m2.num_params()
        ));
    }

    Ok(format!(
        "resnet34 in9-M1 = {got9} params (analytic match); 3->9 delta = {diff}; M2 = {want_m2}"
    ))
}
