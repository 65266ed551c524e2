//! Build D1 and D2 dataset files from a generated fixture and read them
//! back, demonstrating the binary format round-trip.
//!
//!     cargo run --release --example preprocess_dataset

use spermflow::dataset::{
    build_video_samples, load_labels, read_dataset, sample_chunk_positions, write_dataset,
    DatasetKind, Task, CHUNK_LEN,
};
use spermflow::flow::FarnebackParams;
use spermflow::media::open_video;
use spermflow::synthetic::{generate_fixture, FixtureSpec};

fn main() -> spermflow::Result<()> {
    let dir = tempfile::tempdir().expect("tempdir");
    let fixture = generate_fixture(
        dir.path(),
        &FixtureSpec {
            n_videos: 3,
            frames: 16,
            width: 128,
            height: 128,
            seed: 3,
        },
    )?;
    let labels = load_labels(&fixture.labels_path)?;
    let params = FarnebackParams::default();

    for kind in [DatasetKind::D1, DatasetKind::D2] {
        let mut samples = Vec::new();
        for label in &labels {
            let src = open_video(&fixture.videos_dir.join(&label.video_id))?;
            let starts = sample_chunk_positions(src.frame_count, 4, CHUNK_LEN)?;
            samples.extend(build_video_samples(
                &src,
                label,
                Task::Motility,
                kind,
                &params,
                &starts,
            )?);
        }
        let path = dir.path().join(format!("{kind}.sprm"));
        let manifest = write_dataset(&samples, &path, kind, &params)?;
        let (back, back_kind, _) = read_dataset(&path)?;
        assert_eq!(back, samples, "round trip must be bit-exact");
        println!(
            "{kind}: wrote {} samples ({} per video), read back {} ({back_kind}), manifest chunks {:?}",
            manifest.sample_count,
            manifest.per_video_chunks.values().next().unwrap(),
            back.len(),
            manifest.per_video_chunks
        );
    }
    Ok(())
}
