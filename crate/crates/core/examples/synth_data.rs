//! Writes a procedural face dataset and prints its manifest.
//!
//! cargo run --example synth_data -- [out_dir] [emotions,comma,separated]

use std::path::PathBuf;

use exprgen::data::synthetic::{generate_synthetic_dataset, SyntheticConfig};
use exprgen::data::{mouth_mask, ExpressionClip, Split};

fn main() -> exprgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("exprgen_synth"));
    let emotions: Vec<String> = args
        .next()
        .map(|s| s.split(',').map(str::to_string).collect())
        .unwrap_or_else(|| vec!["happy".into(), "surprised".into()]);

    let cfg = SyntheticConfig {
        emotions,
        val_subjects: 1,
        ..SyntheticConfig::default()
    };
    let manifest = generate_synthetic_dataset(&cfg, &out)?;
    print!("{}", manifest.to_text());

    let entry = manifest.split(Split::Train).next().expect("non-empty split");
    let clip = ExpressionClip::load(entry)?;
    let peak = clip.len() - 1;
    let mask = mouth_mask(&clip.landmarks[peak], clip.frames[peak].height(), clip.frames[peak].width())?;
    let masked = out.join("peak_mouth.png");
    clip.frames[peak].masked(&mask)?.save_png(&masked)?;
    println!(
        "{} frames, coefficients {:?}, mouth covers {} px -> {}",
        clip.len(),
        clip.coefficients,
        mask.count(),
        masked.display()
    );
    Ok(())
}
