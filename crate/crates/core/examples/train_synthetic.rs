//! Trains a small model on procedural faces and reports reconstruction at the
//! clip endpoints.
//!
//! cargo run --release --example train_synthetic -- [steps] [out_dir] [config.toml]

use std::path::PathBuf;

use exprgen::data::synthetic::{generate_synthetic_dataset, SyntheticConfig};
use exprgen::data::{Split, TrainingSet};
use exprgen::objectives::recon_l1;
use exprgen::model::ActionVector;
use exprgen::train::{TrainConfig, Trainer};

fn main() -> exprgen::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map(|s| s.parse().expect("steps")).unwrap_or(300);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_train_synthetic"));

    let manifest = generate_synthetic_dataset(&SyntheticConfig::default(), &out.join("data"))?;
    let base = match args.next() {
        Some(p) => TrainConfig::load(std::path::Path::new(&p))?,
        None => TrainConfig {
            random_crop: false,
            ..TrainConfig::default()
        },
    };
    let config = TrainConfig {
        max_steps: Some(steps),
        ..base
    };
    let mut trainer = Trainer::from_manifest(&manifest, config)?;
    let started = std::time::Instant::now();
    trainer.run(Some(&out.join("run")))?;
    println!("{steps} steps in {:.1}s", started.elapsed().as_secs_f64());

    let data = TrainingSet::load(&manifest, Split::Train)?;
    let g = trainer.generator();
    for (k, clip) in data.clips.iter().enumerate() {
        let first = data.pair_from(clip, 0, exprgen::data::CropGeometry::for_input_size(64), false, 0)?;
        let last = data.pair_from(clip, clip.len() - 1, exprgen::data::CropGeometry::for_input_size(64), false, 0)?;
        let neutral = g.generate_frame(&first.input, &ActionVector::zeros(1))?;
        let peak = g.generate_frame(&first.input, &ActionVector::one_hot(1, 1, 1.0)?)?;
        println!(
            "clip {k}: recon a=0 {:.4}  a=1 {:.4}",
            recon_l1(&neutral.frame, &first.target)?,
            recon_l1(&peak.frame, &last.target)?
        );
    }
    Ok(())
}
