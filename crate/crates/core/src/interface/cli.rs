use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{fit_to_input, load_manifest, synthetic, ExpressionClip, FrameImage, Split};
use crate::evaluation::{compare_report, evaluate_clip, smoothness_stats, ContinuityCurve};
use crate::model::load_params;
use crate::synthesis::{export_video, render, ActionSchedule, Ffmpeg, ScheduleSpec, VideoEncoder};
use crate::train::{resume_training, train, TrainConfig};
use crate::{Error, Result};

/// Environment variable holding the default checkpoint for `generate`, `evaluate` and `serve`.
pub const CHECKPOINT_ENV: &str = "EXPRGEN_CHECKPOINT";

#[derive(Debug, Parser)]
#[command(name = "exprgen", version, about = "Controllable facial-expression video synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a procedural face dataset with exact landmarks.
    SynthData(SynthDataArgs),
    /// Train a model on a dataset manifest.
    Train(TrainArgs),
    /// Render a clip from one face image and an action schedule.
    Generate(GenerateArgs),
    /// Compare landmark continuity of generated and real clips.
    Evaluate(EvaluateArgs),
    /// Run the HTTP inference service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthDataArgs {
    /// Output directory; receives clips/ and manifest.txt.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 4)]
    pub subjects: usize,
    /// Frames per clip.
    #[arg(long, default_value_t = 11)]
    pub frames: usize,
    /// Comma-separated emotion names.
    #[arg(long, value_delimiter = ',', default_value = "happy")]
    pub emotions: Vec<String>,
    /// Frame side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Random seed for face parameters.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subjects (taken from the end) assigned to the validation split.
    #[arg(long, default_value_t = 0)]
    pub val_subjects: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for checkpoints and train_log.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue from the latest checkpoint in --out.
    #[arg(long)]
    pub resume: bool,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Passes over the training clips.
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Stop after this many steps.
    #[arg(long)]
    pub max_steps: Option<u64>,
    /// Pairs per step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Optimizer learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Steps between checkpoints.
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Disable the local (mouth) discriminator.
    #[arg(long)]
    pub no_local_disc: bool,
    /// Disable the landmark loss.
    #[arg(long)]
    pub no_landmark_loss: bool,
    /// Disable the temporal regularizer.
    #[arg(long)]
    pub no_temporal_reg: bool,
    /// Use center crops instead of random crops.
    #[arg(long)]
    pub no_random_crop: bool,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("sched").required(true).args(["schedule", "linear", "unimodal", "transfer"])))]
pub struct GenerateArgs {
    /// Model checkpoint.
    #[arg(long, env = CHECKPOINT_ENV)]
    pub checkpoint: PathBuf,
    /// Neutral face image (PNG); center-cropped and resized to the model input.
    #[arg(long)]
    pub image: PathBuf,
    /// Schedule file: one line per frame, comma-separated degrees in emotion order.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Linear ramp EMOTION:COUNT, degrees 1/COUNT..1.
    #[arg(long, value_name = "EMOTION:COUNT")]
    pub linear: Option<String>,
    /// Rise-and-fall EMOTION:COUNT, degrees 0..1..0.
    #[arg(long, value_name = "EMOTION:COUNT")]
    pub unimodal: Option<String>,
    /// Cross-fade FROM:TO:COUNT.
    #[arg(long, value_name = "FROM:TO:COUNT")]
    pub transfer: Option<String>,
    /// Output directory for numbered frames.
    #[arg(long)]
    pub out: PathBuf,
    /// Frames per second for the video file.
    #[arg(long, default_value_t = 10)]
    pub fps: u32,
    /// Also encode video.mp4 with this ffmpeg executable.
    #[arg(long, value_name = "FFMPEG")]
    pub video: Option<Option<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model checkpoint.
    #[arg(long, env = CHECKPOINT_ENV)]
    pub checkpoint: PathBuf,
    /// Dataset manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Split to evaluate (train or val).
    #[arg(long, default_value = "val")]
    pub split: String,
    /// Evaluate at most this many clips.
    #[arg(long)]
    pub clips: Option<usize>,
    /// Output directory for continuity.csv, continuity.png and stats.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Model checkpoint.
    #[arg(long, env = CHECKPOINT_ENV)]
    pub checkpoint: PathBuf,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Largest accepted request body in bytes.
    #[arg(long, default_value_t = super::server::DEFAULT_BODY_LIMIT)]
    pub max_body_bytes: usize,
}

/// Parses `argv` (including the program name), runs the command, and returns
/// the process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::SynthData(a) => synth_data(a),
        Command::Train(a) => train_cmd(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Serve(a) => serve(a),
    }
}

fn synth_data(a: SynthDataArgs) -> Result<()> {
    let cfg = synthetic::SyntheticConfig {
        subjects: a.subjects,
        frames: a.frames,
        emotions: a.emotions,
        size: a.size,
        seed: a.seed,
        val_subjects: a.val_subjects,
    };
    let m = synthetic::generate_synthetic_dataset(&cfg, &a.out)?;
    println!("wrote {} clips, manifest {}", m.clips.len(), m.path.display());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut c = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.epochs {
        c.epochs = v;
    }
    if a.max_steps.is_some() {
        c.max_steps = a.max_steps;
    }
    if let Some(v) = a.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = a.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = a.checkpoint_every {
        c.checkpoint_every = v;
    }
    c.ablations.use_local_disc &= !a.no_local_disc;
    c.ablations.use_landmark_loss &= !a.no_landmark_loss;
    c.ablations.use_temporal_reg &= !a.no_temporal_reg;
    c.random_crop &= !a.no_random_crop;
    c.validate()?;
    Ok(c)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let config = train_config(&a)?;
    let manifest = load_manifest(&a.manifest)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    std::fs::write(a.out.join("config.toml"), config.to_toml()?).map_err(|e| Error::io(&a.out, e))?;
    let state = if a.resume {
        resume_training(&manifest, config, &a.out)?
    } else {
        train(&manifest, config, &a.out)?
    };
    println!("trained {} steps; checkpoints in {}", state.step, a.out.display());
    Ok(())
}

fn schedule_from(a: &GenerateArgs) -> Result<Option<ScheduleSpec>> {
    let builders = [("linear", &a.linear), ("unimodal", &a.unimodal), ("transfer", &a.transfer)];
    builders
        .iter()
        .find_map(|(kind, v)| v.as_ref().map(|v| ScheduleSpec::parse_builder(kind, v)))
        .transpose()
}

fn generate(a: GenerateArgs) -> Result<()> {
    let (generator, _) = load_params(&a.checkpoint)?;
    let emotions = &generator.config().emotions;
    let schedule = match (&a.schedule, schedule_from(&a)?) {
        (Some(p), _) => {
            let s = ActionSchedule::load(p)?;
            s.check_width(emotions.len())?;
            s
        }
        (None, Some(spec)) => spec.build(emotions)?,
        (None, None) => return Err(Error::Schedule("no schedule given".into())),
    };
    let image = fit_to_input(&FrameImage::load(&a.image)?, generator.config().input_size)?;
    let seq = render(&generator, &image, &schedule)?;
    let ffmpeg = a.video.as_ref().map(|p| Ffmpeg {
        program: p.clone().unwrap_or_else(|| PathBuf::from("ffmpeg")),
    });
    let export = export_video(&seq, &a.out, a.fps, ffmpeg.as_ref().map(|f| f as &dyn VideoEncoder))?;
    println!("wrote {} frames to {}", export.frames.len(), a.out.display());
    if let Some(v) = export.video {
        println!("video: {}", v.display());
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let split = match a.split.as_str() {
        "train" => Split::Train,
        "val" => Split::Val,
        other => return Err(Error::Config(format!("unknown split {other:?}"))),
    };
    let (generator, _) = load_params(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    if manifest.emotions != generator.config().emotions {
        return Err(Error::ArchitectureMismatch("manifest emotions differ from the checkpoint".into()));
    }
    let entries: Vec<_> = manifest.split(split).take(a.clips.unwrap_or(usize::MAX)).collect();
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut curves: Vec<(String, ContinuityCurve)> = Vec::new();
    let mut stats = Vec::new();
    for entry in entries {
        let clip = ExpressionClip::load(entry)?;
        let eval = evaluate_clip(&generator, &clip, None)?;
        let name = entry.rel_dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        stats.push(serde_json::json!({
            "clip": name,
            "generated": smoothness_stats(&eval.generated)?,
            "ground_truth": smoothness_stats(&eval.ground_truth)?,
        }));
        curves.push((format!("{name}_generated"), eval.generated));
        curves.push((format!("{name}_truth"), eval.ground_truth));
    }
    write_report(&a.out, &curves, &stats)
}

fn write_report(out: &Path, curves: &[(String, ContinuityCurve)], stats: &[serde_json::Value]) -> Result<()> {
    let files = compare_report(curves, out)?;
    let stats_path = out.join("stats.json");
    let text = serde_json::to_string_pretty(stats).map_err(|e| Error::Invalid(e.to_string()))?;
    std::fs::write(&stats_path, text).map_err(|e| Error::io(&stats_path, e))?;
    println!("wrote {}, {}, {}", files.table.display(), files.plot.display(), stats_path.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    rt.block_on(super::server::serve(a.checkpoint, a.bind, a.max_body_bytes))
}
