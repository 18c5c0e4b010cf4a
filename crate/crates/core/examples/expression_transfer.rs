//! Moves one face from one emotion to another, then mixes two emotions at once.
//!
//! cargo run --example expression_transfer -- [checkpoint.safetensors] [out_dir]
//!
//! The checkpoint needs at least two emotions; without one a fresh
//! happy/surprised model is used.

use std::path::PathBuf;

use candle_core::DType;
use exprgen::data::synthetic::{ExpressionStyle, FaceParams};
use exprgen::data::EmotionSet;
use exprgen::model::{load_params, ActionVector, Generator};
use exprgen::synthesis::{export_video, render, transfer_schedule, ActionSchedule, EncodedImage};
use exprgen::train::ScaleConfig;
use rand::SeedableRng;

fn main() -> exprgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let generator = match args.next().filter(|a| a != "-") {
        Some(path) => load_params(&PathBuf::from(path))?.0,
        None => {
            let emotions = EmotionSet::new(["happy", "surprised"])?;
            Generator::new(ScaleConfig::default().model_config(emotions), DType::F32, 0)?
        }
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_transfer"));
    let emotions = generator.config().emotions.clone();
    assert!(emotions.len() >= 2, "transfer needs a model with two or more emotions");
    let (from, to) = (&emotions.names()[0], &emotions.names()[1]);

    let size = generator.config().input_size;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let face = FaceParams::random(&mut rng, size);
    let image = face.render(&face.landmarks(&ExpressionStyle::neutral()), size);

    let transfer = transfer_schedule(&emotions, from, to, 12)?;
    let seq = render(&generator, &image, &transfer)?;
    export_video(&seq, &out.join("transfer"), 12, None)?;
    println!("{from} -> {to}: {} frames", seq.len());

    // Mixing: both entries ramp up together; vectors may sum past 1.
    let n = emotions.len();
    let mixed = ActionSchedule::new(
        (0..=8)
            .map(|k| {
                let mut v = vec![0.0; n];
                v[0] = k as f64 / 8.0;
                v[1] = k as f64 / 8.0;
                ActionVector::new(v)
            })
            .collect::<exprgen::Result<_>>()?,
    )?;
    export_video(&render(&generator, &image, &mixed)?, &out.join("mixed"), 12, None)?;

    // Encodings can be reused across any number of vectors.
    let encoded = EncodedImage::for_schedule(&generator, &image, &mixed)?;
    let (_, peak) = encoded.frame(&generator, &mixed.steps()[8])?;
    println!("mixed peak mouth landmark 0: {:?}", peak.mouth()[0]);
    println!("frames under {}", out.display());
    Ok(())
}
