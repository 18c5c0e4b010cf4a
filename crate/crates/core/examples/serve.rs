//! Serves the HTTP API for a checkpoint.
//!
//! cargo run --release --example serve -- [checkpoint.safetensors] [addr]
//!
//! Without a checkpoint a fresh single-emotion model is written to a temporary
//! file first. Try:
//!
//!   curl localhost:8080/health
//!   curl localhost:8080/emotions

use std::path::PathBuf;

use candle_core::DType;
use exprgen::data::EmotionSet;
use exprgen::interface::serve;
use exprgen::interface::server::DEFAULT_BODY_LIMIT;
use exprgen::model::{save_params, Discriminators, Generator};
use exprgen::train::ScaleConfig;

fn main() -> exprgen::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let checkpoint = match args.next().filter(|a| a != "-") {
        Some(p) => PathBuf::from(p),
        None => {
            let cfg = ScaleConfig::default().model_config(EmotionSet::new(["happy"])?);
            let path = std::env::temp_dir().join("exprgen_untrained.safetensors");
            let g = Generator::new(cfg.clone(), DType::F32, 0)?;
            save_params(&path, &g, &Discriminators::new(&cfg, DType::F32, 1)?)?;
            path
        }
    };
    let addr = args.next().unwrap_or_else(|| "127.0.0.1:8080".into()).parse().expect("socket address");
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    rt.block_on(serve(checkpoint, addr, DEFAULT_BODY_LIMIT))
}
