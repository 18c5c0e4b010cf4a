//! Trains briefly on procedural faces, then compares the generated landmark
//! continuity curve against the ground-truth clip.
//!
//! cargo run --release --example evaluate_continuity -- [steps] [out_dir]

use std::path::PathBuf;

use exprgen::data::synthetic::{generate_synthetic_dataset, SyntheticConfig};
use exprgen::data::{ExpressionClip, Split};
use exprgen::evaluation::{compare_report, evaluate_clip, smoothness_stats};
use exprgen::train::{ScaleConfig, TrainConfig, Trainer};

fn main() -> exprgen::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().map(|s| s.parse().expect("steps")).unwrap_or(200);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_continuity"));

    let manifest = generate_synthetic_dataset(&SyntheticConfig::default(), &out.join("data"))?;
    let config = TrainConfig {
        max_steps: Some(steps),
        learning_rate: 1e-3,
        random_crop: false,
        scale: ScaleConfig {
            base_width: 8,
            max_width: 32,
            ..ScaleConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::from_manifest(&manifest, config)?;
    trainer.run(None)?;

    let mut curves = Vec::new();
    for entry in manifest.split(Split::Train).take(2) {
        let clip = ExpressionClip::load(entry)?;
        let eval = evaluate_clip(trainer.generator(), &clip, None)?;
        let stats = smoothness_stats(&eval.generated)?;
        println!(
            "{}: rank corr {:?}, max jump {:.3}, max decrease {:.3}, final {:.3}",
            entry.rel_dir.display(),
            stats.rank_corr,
            stats.max_jump,
            stats.max_decrease,
            stats.final_value
        );
        let name = entry.rel_dir.file_name().unwrap().to_string_lossy().into_owned();
        curves.push((format!("{name}_generated"), eval.generated));
        curves.push((format!("{name}_truth"), eval.ground_truth));
    }
    let files = compare_report(&curves, &out)?;
    println!("{} and {}", files.table.display(), files.plot.display());
    Ok(())
}
