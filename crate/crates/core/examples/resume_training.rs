//! Interrupts a run halfway, resumes it from the last checkpoint, and checks the
//! result against an uninterrupted run.
//!
//! cargo run --release --example resume_training -- [out_dir]

use std::path::PathBuf;

use exprgen::data::synthetic::{generate_synthetic_dataset, SyntheticConfig};
use exprgen::train::{read_log, resume_training, train, ScaleConfig, TrainConfig, LOG_FILE};

fn config(steps: u64) -> TrainConfig {
    TrainConfig {
        max_steps: Some(steps),
        checkpoint_every: 10,
        scale: ScaleConfig {
            input_size: 32,
            levels: 4,
            base_width: 8,
            max_width: 16,
            ..ScaleConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn main() -> exprgen::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_resume"));
    let data = SyntheticConfig {
        size: 32,
        ..SyntheticConfig::default()
    };
    let manifest = generate_synthetic_dataset(&data, &out.join("data"))?;

    let full = train(&manifest, config(40), &out.join("full"))?;
    train(&manifest, config(20), &out.join("split"))?;
    let resumed = resume_training(&manifest, config(40), &out.join("split"))?;

    let same = full.generator.params().checksum()? == resumed.generator.params().checksum()?;
    let log = read_log(&out.join("split").join(LOG_FILE))?;
    println!("resumed at step 20, finished at {}; {} log records", resumed.step, log.len());
    println!("parameters match the uninterrupted run: {same}");
    Ok(())
}
