//! Scratch probe for overfit hyper-parameters (not part of the shipped
//! examples; driven by env vars).
//!
//!     CHUNKS=2 BATCH=2 LR=0.01 EPOCHS=60 cargo run --release --example probe_overfit

use std::time::Instant;

use spermflow::dataset::{
    build_video_samples, load_labels, sample_chunk_positions, DatasetKind, Task, CHUNK_LEN,
};
use spermflow::flow::FarnebackParams;
use spermflow::media::open_video;
use spermflow::nn::{HeadKind, ModelConfig, Variant};
use spermflow::synthetic::{generate_fixture, FixtureSpec};
use spermflow::train::{evaluate, train, TrainConfig};

fn env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() -> spermflow::Result<()> {
    let chunks: usize = env("CHUNKS", 2);
    let batch: usize = env("BATCH", 2);
    let lr: f64 = env("LR", 0.001);
    let epochs: usize = env("EPOCHS", 60);
    let dot_p: f64 = env("DROPOUT", 0.5);

    let dir = tempfile::tempdir().expect("tempdir");
    let fixture = generate_fixture(dir.path(), &FixtureSpec::default())?;
    let labels = load_labels(&fixture.labels_path)?;
    let params = FarnebackParams::default();
    let mut samples = Vec::new();
    let t0 = Instant::now();
    for label in &labels {
        let src = open_video(&fixture.videos_dir.join(&label.video_id))?;
        let starts = sample_chunk_positions(src.frame_count, chunks, CHUNK_LEN)?;
        samples.extend(build_video_samples(
            &src,
            label,
            Task::Motility,
            DatasetKind::D2,
            &params,
            &starts,
        )?);
    }
    println!("{} samples in {:.1?}", samples.len(), t0.elapsed());

    let cfg = TrainConfig {
        task: Task::Motility,
        epochs,
        batch_size: batch,
        seed: 11,
        lr,
        dataset_kind: DatasetKind::D2,
        model: ModelConfig {
            variant: Variant::Tiny,
            head: HeadKind::M2,
            dropout_probs: vec![dot_p, dot_p],
            ..ModelConfig::default()
        },
    };
    let t1 = Instant::now();
    let run = train(&cfg, &samples, &samples)?;
    let mut model = run.model;
    let eval = evaluate(&mut model, &samples, 8)?;
    println!(
        "chunks={chunks} batch={batch} lr={lr} epochs={epochs} p={dot_p}: train {:.1?}",
        t1.elapsed()
    );
    for log in run.logs.iter().step_by((epochs / 10).max(1)) {
        println!(
            "  epoch {:>3}  train MSE {:>10.3}  val MAE {:>7.3}",
            log.epoch, log.train_mse, log.val_mae
        );
    }
    println!(
        "best val MAE {:.3} at epoch {}; final train MAE {:.3} video / {:.3} chunk",
        run.best_val_mae, run.best_epoch, eval.video_mae, eval.chunk_mae
    );
    Ok(())
}
