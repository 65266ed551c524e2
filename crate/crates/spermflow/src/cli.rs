//! Command-line wiring: preprocess, flow, train, cv, predict, report.
//!
//! Every run writes a manifest of its effective configuration next to the
//! output, so any run can be reproduced from config + seed. Exit codes:
//! 0 success, 2 usage/input error, 3 numerical failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, assign_folds_for_ids, load_labels, read_dataset, DatasetKind, DatasetWriter,
    FoldAssignment, SampleTensor, Task, CHUNK_LEN, DEFAULT_CHUNKS_PER_VIDEO,
};
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_to_rgb, write_flo, FarnebackParams};
use crate::media::{open_video, to_grayscale, PixelFrame};
use crate::nn::{build_model, ModelConfig};
use crate::nn::weights::{export_weights, import_weights};
use crate::train::{evaluate, run_cross_validation, train, EpochLog, MetricsReport, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkSampling {
    Uniform,
    Random,
}

/// The JSON run configuration: training fields plus preprocessing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: Task,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub lr: f64,
    pub dataset_kind: DatasetKind,
    pub model: ModelConfig,
    pub flow: FarnebackParams,
    pub chunks_per_video: usize,
    pub chunk_sampling: ChunkSampling,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            task: t.task,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: t.seed,
            lr: t.lr,
            dataset_kind: t.dataset_kind,
            model: t.model,
            flow: FarnebackParams::default(),
            chunks_per_video: DEFAULT_CHUNKS_PER_VIDEO,
            chunk_sampling: ChunkSampling::Uniform,
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            task: self.task,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            lr: self.lr,
            dataset_kind: self.dataset_kind,
            model: self.model.clone(),
        }
    }
}

#[derive(Debug, Args)]
struct CommonOpts {
    /// JSON run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. --set model.variant=tiny (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores for preprocess, 1 elsewhere).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Parser)]
#[command(name = "spermflow", version, about = "Sperm motility/morphology regression from video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dataset file from videos and a labels CSV.
    Preprocess {
        /// Directory holding one frame-directory or .rgb24 stream per video.
        #[arg(long)]
        videos: PathBuf,
        /// Labels CSV (see docs for the header).
        #[arg(long)]
        labels: PathBuf,
        /// Optional fold CSV `video_id,fold`; recorded in the manifest.
        #[arg(long)]
        folds: Option<PathBuf>,
        /// Dataset kind: d1 or d2.
        #[arg(long)]
        kind: DatasetKind,
        /// Which targets to store: motility or morphology.
        #[arg(long, default_value = "motility")]
        task: Task,
        /// Chunks per video (default 250).
        #[arg(long)]
        chunks: Option<usize>,
        /// Output dataset file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Estimate flow between two images and write the HSV visualization.
    Flow {
        #[arg(long)]
        frame_a: PathBuf,
        #[arg(long)]
        frame_b: PathBuf,
        /// Output PNG.
        #[arg(long)]
        out: PathBuf,
        /// Optional .flo binary dump.
        #[arg(long)]
        flo: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train one model on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Fold CSV; with --val-fold, that fold becomes the validation set.
        #[arg(long)]
        folds: Option<PathBuf>,
        #[arg(long)]
        val_fold: Option<u8>,
        /// Output directory (weights, epoch log, manifest).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Three-fold cross-validation producing the MAE report.
    Cv {
        #[arg(long)]
        dataset: PathBuf,
        /// Fold CSV; defaults to the participant-hash assignment.
        #[arg(long)]
        folds: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Per-video predictions from trained weights.
    Predict {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Output CSV `video_id,p1,p2,p3`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Merge cv metric CSVs into one table across D1/D2 x M1/M2.
    Report {
        /// Metric CSVs produced by `cv`.
        inputs: Vec<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// Parses real process arguments and dispatches; returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point over explicit arguments.
pub fn run_from<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess {
            videos,
            labels,
            folds,
            kind,
            task,
            chunks,
            out,
            common,
        } => {
            init_threads(common.threads, None);
            let cfg = load_config(&common)?;
            cmd_preprocess(&videos, &labels, folds.as_deref(), kind, task, chunks, &out, &cfg, &common)
        }
        Command::Flow {
            frame_a,
            frame_b,
            out,
            flo,
            common,
        } => {
            init_threads(common.threads, Some(1));
            let cfg = load_config(&common)?;
            cmd_flow(&frame_a, &frame_b, &out, flo.as_deref(), &cfg, &common)
        }
        Command::Train {
            dataset,
            folds,
            val_fold,
            out,
            common,
        } => {
            init_threads(common.threads, Some(1));
            let cfg = load_config(&common)?;
            cmd_train(&dataset, folds.as_deref(), val_fold, &out, &cfg, &common)
        }
        Command::Cv {
            dataset,
            folds,
            out,
            common,
        } => {
            init_threads(common.threads, Some(1));
            let cfg = load_config(&common)?;
            cmd_cv(&dataset, folds.as_deref(), &out, &cfg, &common)
        }
        Command::Predict {
            dataset,
            weights,
            out,
            common,
        } => {
            init_threads(common.threads, Some(1));
            let cfg = load_config(&common)?;
            cmd_predict(&dataset, &weights, &out, &cfg, &common)
        }
        Command::Report { inputs, out, common } => {
            let cfg = load_config(&common)?;
            cmd_report(&inputs, &out, &cfg, &common)
        }
    }
}

fn init_threads(requested: Option<usize>, default: Option<usize>) {
    if let Some(n) = requested.or(default) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn load_config(common: &CommonOpts) -> Result<RunConfig> {
    let mut value: serde_json::Value = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            serde_json::to_value(cfg).expect("config serializes")
        }
        None => serde_json::to_value(RunConfig::default()).expect("default serializes"),
    };
    for kv in &common.set {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("--set expects key=value, got {kv:?}")))?;
        apply_override(&mut value, key, raw)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| Error::InvalidConfig(format!("after --set overrides: {e}")))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_override(root: &mut serde_json::Value, path: &str, raw: &str) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments.split_last().expect("split always yields one");
    let mut cur = root;
    for seg in parents {
        cur = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{path} does not address an object")))?
            .get_mut(*seg)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {path}")))?;
    }
    let obj = cur
        .as_object_mut()
        .ok_or_else(|| Error::InvalidConfig(format!("{path} does not address an object")))?;
    if !obj.contains_key(*last) {
        return Err(Error::InvalidConfig(format!("unknown config key {path}")));
    }
    let parsed: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    obj.insert((*last).to_string(), parsed);
    Ok(())
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    inputs: BTreeMap<String, String>,
    config: &'a RunConfig,
    threads: Option<usize>,
    outputs: BTreeMap<String, String>,
    output_sha256: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

fn sha256_file(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_run_manifest(
    manifest_path: &Path,
    command: &str,
    inputs: &[(&str, &Path)],
    outputs: &[(&str, &Path)],
    cfg: &RunConfig,
    common: &CommonOpts,
    extra: Option<serde_json::Value>,
) -> Result<()> {
    let mut out_map = BTreeMap::new();
    let mut hashes = BTreeMap::new();
    for (name, path) in outputs {
        out_map.insert(name.to_string(), path.display().to_string());
        if path.is_file() {
            hashes.insert(name.to_string(), sha256_file(path)?);
        }
    }
    let manifest = RunManifest {
        command,
        inputs: inputs
            .iter()
            .map(|(k, v)| (k.to_string(), v.display().to_string()))
            .collect(),
        config: cfg,
        threads: common.threads,
        outputs: out_map,
        output_sha256: hashes,
        extra,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(manifest_path, json).map_err(|e| Error::io(manifest_path, e))
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn cmd_preprocess(
    videos_dir: &Path,
    labels_path: &Path,
    folds_path: Option<&Path>,
    kind: DatasetKind,
    task: Task,
    chunks: Option<usize>,
    out: &Path,
    cfg: &RunConfig,
    common: &CommonOpts,
) -> Result<()> {
    let labels = load_labels(labels_path)?;
    if labels.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no labeled videos in {}",
            labels_path.display()
        )));
    }
    // Validate folds up front when given so mistakes fail before the build.
    if folds_path.is_some() {
        dataset::assign_folds(&labels, folds_path)?;
    }
    let n_chunks = chunks.unwrap_or(cfg.chunks_per_video);

    let mut writer = DatasetWriter::create(out, kind, &cfg.flow)?;
    for label in &labels {
        let dir_path = videos_dir.join(&label.video_id);
        let raw_path = videos_dir.join(format!("{}.rgb24", label.video_id));
        let src = if dir_path.is_dir() {
            open_video(&dir_path)?
        } else {
            open_video(&raw_path)?
        };
        let starts = match cfg.chunk_sampling {
            ChunkSampling::Uniform => {
                dataset::sample_chunk_positions(src.frame_count, n_chunks, CHUNK_LEN)
            }
            ChunkSampling::Random => dataset::sample_chunk_positions_random(
                src.frame_count,
                n_chunks,
                CHUNK_LEN,
                cfg.seed,
            ),
        }
        .map_err(|e| match e {
            Error::VideoTooShort(_, got, need) => {
                Error::VideoTooShort(label.video_id.clone(), got, need)
            }
            other => other,
        })?;
        // Bound memory: materialize a few dozen chunks at a time.
        for batch in starts.chunks(24) {
            let samples =
                dataset::build_video_samples(&src, label, task, kind, &cfg.flow, batch)?;
            for s in &samples {
                writer.write_sample(s)?;
            }
        }
        println!("{}: {} chunks", label.video_id, starts.len());
    }
    let manifest = writer.finish()?;
    println!(
        "wrote {} samples ({} videos) to {}",
        manifest.sample_count,
        manifest.per_video_chunks.len(),
        out.display()
    );

    let mut inputs: Vec<(&str, &Path)> = vec![("videos", videos_dir), ("labels", labels_path)];
    if let Some(f) = folds_path {
        inputs.push(("folds", f));
    }
    write_run_manifest(
        &manifest_sibling(out),
        "preprocess",
        &inputs,
        &[("dataset", out)],
        cfg,
        common,
        Some(serde_json::json!({
            "kind": kind,
            "task": task,
            "chunks_per_video": n_chunks,
            "dataset_manifest": manifest,
        })),
    )
}

fn manifest_sibling(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_os_string();
    os.push(".run.json");
    PathBuf::from(os)
}

fn load_image_frame(path: &Path) -> Result<PixelFrame> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_rgb8();
    PixelFrame::new(img.width() as usize, img.height() as usize, img.into_raw())
}

fn save_png(frame: &PixelFrame, path: &Path) -> Result<()> {
    let img = image::RgbImage::from_raw(
        frame.width as u32,
        frame.height as u32,
        frame.data.clone(),
    )
    .expect("frame buffer");
    img.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

fn cmd_flow(
    frame_a: &Path,
    frame_b: &Path,
    out: &Path,
    flo: Option<&Path>,
    cfg: &RunConfig,
    common: &CommonOpts,
) -> Result<()> {
    let a = to_grayscale(&load_image_frame(frame_a)?);
    let b = to_grayscale(&load_image_frame(frame_b)?);
    let flow = estimate_flow(&a, &b, &cfg.flow, None)?;
    save_png(&flow_to_rgb(&flow), out)?;
    if let Some(flo_path) = flo {
        write_flo(&flow, flo_path)?;
    }
    let (mu, mv) = flow.median();
    println!("flow {}x{}: median displacement ({mu:.3}, {mv:.3}) px", flow.width, flow.height);

    let mut outputs: Vec<(&str, &Path)> = vec![("image", out)];
    if let Some(f) = flo {
        outputs.push(("flo", f));
    }
    write_run_manifest(
        &manifest_sibling(out),
        "flow",
        &[("frame_a", frame_a), ("frame_b", frame_b)],
        &outputs,
        cfg,
        common,
        None,
    )
}

fn read_and_check_dataset(
    dataset_path: &Path,
    cfg: &RunConfig,
) -> Result<Vec<SampleTensor>> {
    let (samples, kind, _) = read_dataset(dataset_path)?;
    if kind != cfg.dataset_kind {
        return Err(Error::InvalidConfig(format!(
            "dataset {} is {kind}, config wants {}",
            dataset_path.display(),
            cfg.dataset_kind
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.task != cfg.task) {
        return Err(Error::InvalidConfig(format!(
            "dataset stores {} targets, config wants {}",
            s.task, cfg.task
        )));
    }
    Ok(samples)
}

fn dataset_folds(
    samples: &[SampleTensor],
    folds_path: Option<&Path>,
) -> Result<FoldAssignment> {
    let ids: std::collections::BTreeSet<&str> =
        samples.iter().map(|s| s.video_id.as_str()).collect();
    assign_folds_for_ids(ids, folds_path)
}

fn write_epoch_csv(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut text = String::from("epoch,train_mse,val_mae\n");
    for log in logs {
        text.push_str(&format!(
            "{},{:.9},{:.9}\n",
            log.epoch, log.train_mse, log.val_mae
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_train(
    dataset_path: &Path,
    folds_path: Option<&Path>,
    val_fold: Option<u8>,
    out_dir: &Path,
    cfg: &RunConfig,
    common: &CommonOpts,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let samples = read_and_check_dataset(dataset_path, cfg)?;

    let (train_set, val_set): (Vec<SampleTensor>, Vec<SampleTensor>) = match (folds_path, val_fold)
    {
        (Some(f), Some(k)) => {
            if k > 2 {
                return Err(Error::InvalidConfig(format!("val fold {k} outside 0..=2")));
            }
            let folds = dataset_folds(&samples, Some(f))?;
            let val: Vec<SampleTensor> = samples
                .iter()
                .filter(|s| folds.fold_of(&s.video_id) == Some(k))
                .cloned()
                .collect();
            let train: Vec<SampleTensor> = samples
                .iter()
                .filter(|s| folds.fold_of(&s.video_id) != Some(k))
                .cloned()
                .collect();
            (train, val)
        }
        (None, None) => (samples.clone(), samples.clone()),
        _ => {
            return Err(Error::InvalidConfig(
                "--folds and --val-fold must be given together".into(),
            ))
        }
    };

    let run = train(&cfg.train_config(), &train_set, &val_set)?;
    let weights_path = out_dir.join("model.spwt");
    let mut model = run.model;
    export_weights(&mut model, &weights_path)?;
    let epochs_path = out_dir.join("epochs.csv");
    write_epoch_csv(&epochs_path, &run.logs)?;
    println!(
        "trained {} epochs; best val MAE {:.3} at epoch {}",
        run.logs.len(),
        run.best_val_mae,
        run.best_epoch
    );

    let mut inputs: Vec<(&str, &Path)> = vec![("dataset", dataset_path)];
    if let Some(f) = folds_path {
        inputs.push(("folds", f));
    }
    write_run_manifest(
        &out_dir.join("manifest.json"),
        "train",
        &inputs,
        &[("weights", &weights_path), ("epochs", &epochs_path)],
        cfg,
        common,
        Some(serde_json::json!({
            "best_epoch": run.best_epoch,
            "best_val_mae": run.best_val_mae,
            "val_fold": val_fold,
        })),
    )
}

fn cmd_cv(
    dataset_path: &Path,
    folds_path: Option<&Path>,
    out_dir: &Path,
    cfg: &RunConfig,
    common: &CommonOpts,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let samples = read_and_check_dataset(dataset_path, cfg)?;
    let folds = dataset_folds(&samples, folds_path)?;

    let cv = run_cross_validation(&cfg.train_config(), &samples, &folds)?;

    let metrics_csv = out_dir.join("metrics.csv");
    cv.report.write_csv(&metrics_csv)?;
    let table = cv.report.render_tables();
    let metrics_txt = out_dir.join("metrics.txt");
    std::fs::write(&metrics_txt, &table).map_err(|e| Error::io(&metrics_txt, e))?;
    print!("{table}");

    let mut outputs: Vec<(String, PathBuf)> = vec![
        ("metrics_csv".into(), metrics_csv.clone()),
        ("metrics_txt".into(), metrics_txt.clone()),
    ];
    for fold_run in cv.folds {
        let epochs_path = out_dir.join(format!("fold{}_epochs.csv", fold_run.fold));
        write_epoch_csv(&epochs_path, &fold_run.logs)?;
        let weights_path = out_dir.join(format!("fold{}.spwt", fold_run.fold));
        let mut model = fold_run.model;
        export_weights(&mut model, &weights_path)?;
        outputs.push((format!("fold{}_epochs", fold_run.fold), epochs_path));
        outputs.push((format!("fold{}_weights", fold_run.fold), weights_path));
    }

    let mut inputs: Vec<(&str, &Path)> = vec![("dataset", dataset_path)];
    if let Some(f) = folds_path {
        inputs.push(("folds", f));
    }
    let output_refs: Vec<(&str, &Path)> = outputs
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_path()))
        .collect();
    write_run_manifest(
        &out_dir.join("manifest.json"),
        "cv",
        &inputs,
        &output_refs,
        cfg,
        common,
        None,
    )
}

fn cmd_predict(
    dataset_path: &Path,
    weights_path: &Path,
    out: &Path,
    cfg: &RunConfig,
    common: &CommonOpts,
) -> Result<()> {
    let samples = read_and_check_dataset(dataset_path, cfg)?;
    let mut model = build_model::<f32>(&cfg.model, cfg.seed)?;
    import_weights(&mut model, weights_path)?;
    let eval = evaluate(&mut model, &samples, cfg.batch_size)?;

    let mut text = String::from("video_id,p1,p2,p3\n");
    for (id, pred) in &eval.video_preds {
        text.push_str(&format!(
            "{id},{:.6},{:.6},{:.6}\n",
            pred[0], pred[1], pred[2]
        ));
    }
    std::fs::write(out, text).map_err(|e| Error::io(out, e))?;
    println!(
        "predicted {} videos; per-video MAE vs stored targets {:.3}",
        eval.video_preds.len(),
        eval.video_mae
    );

    write_run_manifest(
        &manifest_sibling(out),
        "predict",
        &[("dataset", dataset_path), ("weights", weights_path)],
        &[("predictions", out)],
        cfg,
        common,
        None,
    )
}

fn cmd_report(inputs: &[PathBuf], out_dir: &Path, cfg: &RunConfig, common: &CommonOpts) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::InvalidConfig("report needs at least one metrics CSV".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut reports = Vec::new();
    for path in inputs {
        reports.push(MetricsReport::read_csv(path)?);
    }
    let merged = MetricsReport::merge(reports);

    let csv_path = out_dir.join("report.csv");
    merged.write_csv(&csv_path)?;
    let table = merged.render_tables();
    let txt_path = out_dir.join("report.txt");
    std::fs::write(&txt_path, &table).map_err(|e| Error::io(&txt_path, e))?;
    print!("{table}");

    let input_refs: Vec<(&str, &Path)> =
        inputs.iter().map(|p| ("metrics", p.as_path())).collect();
    write_run_manifest(
        &out_dir.join("manifest.json"),
        "report",
        &input_refs,
        &[("report_csv", &csv_path), ("report_txt", &txt_path)],
        cfg,
        common,
        None,
    )
}
