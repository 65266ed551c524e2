//! Training: Adam on MSE, MAE evaluation with per-video aggregation, and the
//! 3-fold cross-validation driver.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetKind, FoldAssignment, SampleTensor, Task, SAMPLE_CHANNELS, SAMPLE_SIZE};
use crate::error::{Error, Result};
use crate::nn::{build_model, Mode, Model, ModelConfig, Scalar, Tensor};

mod metrics;

pub use metrics::{MaeRow, MetricsReport};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean squared error over all `3N` elements, plus its gradient
/// `2 (pred - target) / (3N)`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = pred.numel() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut acc = 0.0f64;
    for i in 0..pred.numel() {
        let d = pred.data()[i].as_f64() - target.data()[i].as_f64();
        acc += d * d;
        grad.data_mut()[i] = T::of_f64(2.0 * d / n);
    }
    Ok((acc / n, grad))
}

/// Mean absolute error over all `3N` elements.
pub fn mae<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mae",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let n = pred.numel() as f64;
    let acc: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p.as_f64() - t.as_f64()).abs())
        .sum();
    Ok(acc / n)
}

fn mae_slices(pred: &[f64], target: &[f64]) -> f64 {
    let acc: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).abs())
        .sum();
    acc / pred.len() as f64
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Optimizer hyper-parameters; the paper's values are the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
struct AdamSlot<T: Scalar> {
    name: String,
    m: Vec<T>,
    v: Vec<T>,
}

/// Per-parameter first/second moments plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState<T: Scalar> {
    pub hyper: AdamHyper,
    pub t: u64,
    slots: Vec<AdamSlot<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(hyper: AdamHyper) -> Self {
        Self {
            hyper,
            t: 0,
            slots: Vec::new(),
        }
    }
}

/// One Adam update on a single parameter slice:
/// `m = b1 m + (1-b1) g`, `v = b2 v + (1-b2) g^2`, bias-corrected, then
/// `p -= lr * m_hat / (sqrt(v_hat) + eps)`. `t` is the post-increment step.
pub fn adam_update_slice<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    hyper: &AdamHyper,
) {
    let b1 = hyper.beta1;
    let b2 = hyper.beta2;
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i].as_f64();
        let mi = b1 * m[i].as_f64() + (1.0 - b1) * g;
        let vi = b2 * v[i].as_f64() + (1.0 - b2) * g * g;
        m[i] = T::of_f64(mi);
        v[i] = T::of_f64(vi);
        let m_hat = mi / bc1;
        let v_hat = vi / bc2;
        let p = param[i].as_f64() - hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        param[i] = T::of_f64(p);
    }
}

/// Applies one Adam step to every model parameter. A non-finite gradient
/// aborts the step and names the offending parameter.
pub fn adam_step_model<T: Scalar>(model: &mut Model<T>, state: &mut AdamState<T>) -> Result<()> {
    // Validate gradients before mutating anything.
    let mut bad: Option<String> = None;
    model.visit_params(&mut |name, tensor| {
        if bad.is_some() {
            return;
        }
        match tensor.grad() {
            Some(g) if g.iter().all(|v| v.is_finite()) => {}
            _ => bad = Some(name.to_string()),
        }
    });
    if let Some(name) = bad {
        return Err(Error::NonFiniteGradient(name));
    }

    if state.slots.is_empty() {
        model.visit_params(&mut |name, tensor| {
            state.slots.push(AdamSlot {
                name: name.to_string(),
                m: vec![T::zero(); tensor.numel()],
                v: vec![T::zero(); tensor.numel()],
            });
        });
    }
    state.t += 1;
    let t = state.t;
    let hyper = state.hyper;
    let mut idx = 0usize;
    let slots = &mut state.slots;
    let mut order_err = None;
    model.visit_params(&mut |name, tensor| {
        if order_err.is_some() {
            return;
        }
        let slot = &mut slots[idx];
        if slot.name != name {
            order_err = Some(format!("parameter order changed at {name}"));
            return;
        }
        let grad = tensor.grad().expect("validated above").to_vec();
        adam_update_slice(tensor.data_mut(), &grad, &mut slot.m, &mut slot.v, t, &hyper);
        idx += 1;
    });
    match order_err {
        Some(e) => Err(Error::InvalidModelConfig(e)),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Adam learning rate (paper value 0.001).
    pub lr: f64,
    pub dataset_kind: DatasetKind,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Motility,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            lr: 0.001,
            dataset_kind: DatasetKind::D2,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidConfig(format!("bad lr {}", self.lr)));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mae: f64,
}

#[derive(Debug)]
pub struct TrainRun {
    pub model: Model<f32>,
    pub logs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
}

fn check_samples(cfg: &TrainConfig, samples: &[SampleTensor], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} set is empty")));
    }
    for s in samples {
        if s.kind != cfg.dataset_kind {
            return Err(Error::InvalidConfig(format!(
                "{what} sample {} has kind {}, config wants {}",
                s.video_id, s.kind, cfg.dataset_kind
            )));
        }
        if s.task != cfg.task {
            return Err(Error::InvalidConfig(format!(
                "{what} sample {} has task {}, config wants {}",
                s.video_id, s.task, cfg.task
            )));
        }
    }
    Ok(())
}

fn stack_batch(samples: &[&SampleTensor]) -> (Tensor<f32>, Tensor<f32>) {
    let n = samples.len();
    let mut x = Tensor::zeros(&[n, SAMPLE_CHANNELS, SAMPLE_SIZE, SAMPLE_SIZE]);
    let mut y = Tensor::zeros(&[n, 3]);
    for (i, s) in samples.iter().enumerate() {
        x.data_mut()[i * SampleTensor::LEN..(i + 1) * SampleTensor::LEN]
            .copy_from_slice(&s.data);
        y.data_mut()[i * 3..(i + 1) * 3].copy_from_slice(&s.target);
    }
    (x, y)
}

/// Per-video and per-chunk evaluation of a model on a sample set.
#[derive(Debug, Clone)]
pub struct EvalResult {
    /// MAE over per-video aggregated predictions (primary metric).
    pub video_mae: f64,
    /// MAE over raw chunk predictions.
    pub chunk_mae: f64,
    pub video_preds: BTreeMap<String, [f64; 3]>,
    pub video_targets: BTreeMap<String, [f64; 3]>,
}

/// Component-wise arithmetic mean of chunk predictions.
pub fn aggregate_video_prediction(preds: &[[f64; 3]]) -> Result<[f64; 3]> {
    if preds.is_empty() {
        return Err(Error::InvalidParameter("no predictions to aggregate".into()));
    }
    let mut out = [0.0f64; 3];
    for p in preds {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|v| *v /= preds.len() as f64);
    Ok(out)
}

/// Eval-mode inference over `samples`, aggregated per video.
pub fn evaluate(model: &mut Model<f32>, samples: &[SampleTensor], batch_size: usize) -> Result<EvalResult> {
    if samples.is_empty() {
        return Err(Error::InvalidConfig("evaluation set is empty".into()));
    }
    let prev_mode = model.mode();
    model.set_mode(Mode::Eval);
    let mut chunk_abs = 0.0f64;
    let mut chunk_count = 0usize;
    let mut by_video: BTreeMap<String, Vec<[f64; 3]>> = BTreeMap::new();
    let mut targets: BTreeMap<String, [f64; 3]> = BTreeMap::new();

    for batch in samples.chunks(batch_size.max(1)) {
        let refs: Vec<&SampleTensor> = batch.iter().collect();
        let (x, y) = stack_batch(&refs);
        let out = model.forward(&x)?;
        for (i, s) in batch.iter().enumerate() {
            let pred = [
                out.data()[i * 3] as f64,
                out.data()[i * 3 + 1] as f64,
                out.data()[i * 3 + 2] as f64,
            ];
            for k in 0..3 {
                chunk_abs += (pred[k] - y.data()[i * 3 + k] as f64).abs();
            }
            chunk_count += 3;
            by_video.entry(s.video_id.clone()).or_default().push(pred);
            targets.insert(
                s.video_id.clone(),
                [s.target[0] as f64, s.target[1] as f64, s.target[2] as f64],
            );
        }
    }
    model.set_mode(prev_mode);

    let mut video_preds = BTreeMap::new();
    let mut flat_pred = Vec::new();
    let mut flat_target = Vec::new();
    for (id, preds) in &by_video {
        let agg = aggregate_video_prediction(preds)?;
        video_preds.insert(id.clone(), agg);
        flat_pred.extend_from_slice(&agg);
        flat_target.extend_from_slice(&targets[id]);
    }
    Ok(EvalResult {
        video_mae: mae_slices(&flat_pred, &flat_target),
        chunk_mae: chunk_abs / chunk_count as f64,
        video_preds,
        video_targets: targets,
    })
}

/// Trains a freshly built model; see [`train_with_model`].
pub fn train(cfg: &TrainConfig, train_set: &[SampleTensor], val_set: &[SampleTensor]) -> Result<TrainRun> {
    cfg.validate()?;
    let model = build_model::<f32>(&cfg.model, cfg.seed)?;
    train_with_model(cfg, model, train_set, val_set)
}

/// Shuffled mini-batch training with one Adam step per batch: logs train MSE
/// and validation MAE per epoch and retains the best-validation checkpoint.
///
/// Taking the model as an argument lets tests inject doctored networks
/// (e.g. a zeroed output layer with lr 0 for the constant-predictor check).
pub fn train_with_model(
    cfg: &TrainConfig,
    mut model: Model<f32>,
    train_set: &[SampleTensor],
    val_set: &[SampleTensor],
) -> Result<TrainRun> {
    cfg.validate()?;
    check_samples(cfg, train_set, "train")?;
    check_samples(cfg, val_set, "validation")?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5115_F00D);
    let mut adam = AdamState::new(AdamHyper::with_lr(cfg.lr));
    let mut logs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, crate::nn::model::ModelSnapshot<f32>)> = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        model.set_mode(Mode::Train);
        let mut mse_sum = 0.0f64;
        let mut n_samples = 0usize;
        for (batch_idx, batch_ids) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&SampleTensor> = batch_ids.iter().map(|&i| &train_set[i]).collect();
            let (x, y) = stack_batch(&refs);
            model.zero_grads();
            let out = model.forward(&x)?;
            let (loss, grad) = mse_loss(&out, &y)?;
            if !loss.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "NaN loss at epoch {epoch} batch {batch_idx}: pred range [{:?}], target range [{:?}]",
                    minmax(out.data()),
                    minmax(y.data()),
                )));
            }
            model.backward(&grad)?;
            adam_step_model(&mut model, &mut adam)?;
            mse_sum += loss * refs.len() as f64;
            n_samples += refs.len();
        }
        let train_mse = mse_sum / n_samples as f64;

        let val = evaluate(&mut model, val_set, cfg.batch_size)?;
        logs.push(EpochLog {
            epoch,
            train_mse,
            val_mae: val.video_mae,
        });
        let is_better = best
            .as_ref()
            .map(|(_, b, _)| val.video_mae < *b)
            .unwrap_or(true);
        if is_better {
            best = Some((epoch, val.video_mae, model.snapshot()));
        }
    }

    let (best_epoch, best_val_mae, snapshot) = best.expect("epochs >= 1");
    model.restore(&snapshot)?;
    Ok(TrainRun {
        model,
        logs,
        best_epoch,
        best_val_mae,
    })
}

fn minmax(vals: &[f32]) -> (f32, f32) {
    vals.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct FoldRun {
    pub fold: u8,
    pub logs: Vec<EpochLog>,
    pub eval: EvalResult,
    pub model: Model<f32>,
}

#[derive(Debug)]
pub struct CvRun {
    pub report: MetricsReport,
    pub folds: Vec<FoldRun>,
}

/// Three-fold cross-validation: for each fold, train on the other two and
/// evaluate per-video MAE on the held-out one.
pub fn run_cross_validation(
    cfg: &TrainConfig,
    samples: &[SampleTensor],
    folds: &FoldAssignment,
) -> Result<CvRun> {
    run_cross_validation_with(cfg, samples, folds, &|model_cfg, seed| {
        build_model::<f32>(model_cfg, seed)
    })
}

/// [`run_cross_validation`] with an injectable model factory.
pub fn run_cross_validation_with(
    cfg: &TrainConfig,
    samples: &[SampleTensor],
    folds: &FoldAssignment,
    factory: &dyn Fn(&ModelConfig, u64) -> Result<Model<f32>>,
) -> Result<CvRun> {
    cfg.validate()?;
    check_samples(cfg, samples, "dataset")?;

    // Every sample's video must be fold-assigned.
    for s in samples {
        if folds.fold_of(&s.video_id).is_none() {
            return Err(Error::InvalidConfig(format!(
                "video {} has no fold assignment",
                s.video_id
            )));
        }
    }
    for fold in 0..3u8 {
        if !samples
            .iter()
            .any(|s| folds.fold_of(&s.video_id) == Some(fold))
        {
            return Err(Error::InvalidConfig(format!("fold {fold} has no videos")));
        }
    }

    let mut fold_runs = Vec::with_capacity(3);
    let mut rows = Vec::new();
    for fold in 0..3u8 {
        let train_set: Vec<SampleTensor> = samples
            .iter()
            .filter(|s| folds.fold_of(&s.video_id) != Some(fold))
            .cloned()
            .collect();
        let val_set: Vec<SampleTensor> = samples
            .iter()
            .filter(|s| folds.fold_of(&s.video_id) == Some(fold))
            .cloned()
            .collect();

        // leakage check: train and validation videos must be disjoint
        let train_videos: std::collections::BTreeSet<&str> =
            train_set.iter().map(|s| s.video_id.as_str()).collect();
        if val_set
            .iter()
            .any(|s| train_videos.contains(s.video_id.as_str()))
        {
            return Err(Error::InvalidConfig(
                "fold leakage: video present in both train and validation".into(),
            ));
        }

        let model = factory(&cfg.model, cfg.seed)?;
        let run = train_with_model(cfg, model, &train_set, &val_set)?;
        let mut model = run.model;
        let eval = evaluate(&mut model, &val_set, cfg.batch_size)?;
        rows.push(MaeRow {
            input: cfg.dataset_kind,
            method: cfg.model.head,
            task: cfg.task,
            fold: fold + 1,
            video_mae: eval.video_mae,
            chunk_mae: eval.chunk_mae,
        });
        fold_runs.push(FoldRun {
            fold: fold + 1,
            logs: run.logs,
            eval,
            model,
        });
    }

    Ok(CvRun {
        report: MetricsReport { rows },
        folds: fold_runs,
    })
}
