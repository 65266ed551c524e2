//! Three-fold cross-validation on a small synthetic D1 dataset, printing
//! the per-fold/average MAE table.
//!
//!     cargo run --release --example cross_validation

use spermflow::dataset::{
    assign_folds, build_video_samples, load_labels, sample_chunk_positions, DatasetKind, Task,
    CHUNK_LEN,
};
use spermflow::flow::FarnebackParams;
use spermflow::media::open_video;
use spermflow::nn::{HeadKind, ModelConfig, Variant};
use spermflow::synthetic::{generate_fixture, FixtureSpec};
use spermflow::train::{run_cross_validation, TrainConfig};

fn main() -> spermflow::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let fixture = generate_fixture(
        dir.path(),
        &FixtureSpec {
            n_videos: 6,
            frames: 14,
            width: 96,
            height: 96,
            seed: 9,
        },
    )?;
    let labels = load_labels(&fixture.labels_path)?;
    let folds = assign_folds(&labels, Some(&fixture.folds_path))?;

    let mut samples = Vec::new();
    for label in &labels {
        let src = open_video(&fixture.videos_dir.join(&label.video_id))?;
        let starts = sample_chunk_positions(src.frame_count, 3, CHUNK_LEN)?;
        samples.extend(build_video_samples(
            &src,
            label,
            Task::Motility,
            DatasetKind::D1,
            &FarnebackParams::default(),
            &starts,
        )?);
    }

    let cfg = TrainConfig {
        task: Task::Motility,
        epochs: 3,
        batch_size: 4,
        seed: 0,
        lr: 0.001,
        dataset_kind: DatasetKind::D1,
        model: ModelConfig {
            variant: Variant::Tiny,
            head: HeadKind::M1,
            ..ModelConfig::default()
        },
    };
    let cv = run_cross_validation(&cfg, &samples, &folds)?;
    print!("{}", cv.report.render_tables());
    println!("{}", cv.report.to_csv_string());
    Ok(())
}
