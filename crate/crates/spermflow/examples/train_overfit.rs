//! Overfit a tiny D2-M2 model on eight synthetic moving-dot videos.
//!
//! Builds the fixture, runs D2 preprocessing (two optical flows per chunk),
//! then trains for 200 epochs and reports the final train-set MAE.
//!
//!     cargo run --release --example train_overfit

use std::time::Instant;

use spermflow::dataset::{
    build_video_samples, load_labels, sample_chunk_positions, DatasetKind, Task, CHUNK_LEN,
};
use spermflow::flow::FarnebackParams;
use spermflow::media::open_video;
use spermflow::nn::{HeadKind, ModelConfig, Variant};
use spermflow::synthetic::{generate_fixture, FixtureSpec};
use spermflow::train::{evaluate, train, TrainConfig};

fn main() -> spermflow::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let t0 = Instant::now();
    let fixture = generate_fixture(dir.path(), &FixtureSpec::default())?;
    println!("fixture: 8 videos in {:.1?}", t0.elapsed());

    let t1 = Instant::now();
    let labels = load_labels(&fixture.labels_path)?;
    let params = FarnebackParams::default();
    let mut samples = Vec::new();
    for label in &labels {
        let src = open_video(&fixture.videos_dir.join(&label.video_id))?;
        let starts = sample_chunk_positions(src.frame_count, 2, CHUNK_LEN)?;
        samples.extend(build_video_samples(
            &src,
            label,
            Task::Motility,
            DatasetKind::D2,
            &params,
            &starts,
        )?);
    }
    println!(
        "preprocess: {} D2 samples in {:.1?}",
        samples.len(),
        t1.elapsed()
    );

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

    let t2 = Instant::now();
    let run = train(&cfg, &samples, &samples)?;
    let mut model = run.model;
    let eval = evaluate(&mut model, &samples, 8)?;
    println!("train: 200 epochs in {:.1?}", t2.elapsed());
    for log in run.logs.iter().step_by(20) {
        println!(
            "  epoch {:>3}  train MSE {:>10.3}  val MAE {:>7.3}",
            log.epoch, log.train_mse, log.val_mae
        );
    }
    println!(
        "final train-set MAE: {:.3} per video, {:.3} per chunk",
        eval.video_mae, eval.chunk_mae
    );
    Ok(())
}
