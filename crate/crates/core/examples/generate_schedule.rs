//! Renders a linear and a unimodal schedule from one face and writes the frames.
//!
//! cargo run --example generate_schedule -- [checkpoint.safetensors] [out_dir]
//!
//! Without a checkpoint a freshly initialized model is used, which is enough to
//! see the plumbing but produces noise.

use std::path::PathBuf;

use candle_core::DType;
use exprgen::data::synthetic::{ExpressionStyle, FaceParams};
use exprgen::data::EmotionSet;
use exprgen::model::{load_params, Generator};
use exprgen::synthesis::{export_video, linear_schedule, render, unimodal_schedule};
use exprgen::train::ScaleConfig;
use rand::SeedableRng;

fn main() -> exprgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let generator = match args.next().filter(|a| a != "-") {
        Some(path) => load_params(&PathBuf::from(path))?.0,
        None => Generator::new(ScaleConfig::default().model_config(EmotionSet::new(["happy"])?), DType::F32, 0)?,
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_generate"));

    let size = generator.config().input_size;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let face = FaceParams::random(&mut rng, size);
    let image = face.render(&face.landmarks(&ExpressionStyle::neutral()), size);

    let emotions = &generator.config().emotions;
    let name = &emotions.names()[0];
    for (label, schedule) in [
        ("linear", linear_schedule(emotions, name, 10)?),
        ("unimodal", unimodal_schedule(emotions, name, 11)?),
    ] {
        let seq = render(&generator, &image, &schedule)?;
        let export = export_video(&seq, &out.join(label), 10, None)?;
        println!("{label}: {} frames in {}", export.frames.len(), out.join(label).display());
    }
    Ok(())
}
