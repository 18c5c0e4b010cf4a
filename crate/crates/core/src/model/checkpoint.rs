//! Checkpoint container.
//!
//! A checkpoint is a safetensors file. Its string metadata holds
//!
//! | key              | value                                             |
//! |------------------|---------------------------------------------------|
//! | `format`         | `exprgen-checkpoint`                              |
//! | `format_version` | [`FORMAT_VERSION`]                                |
//! | `dtype`          | `f32` or `f64`                                    |
//! | `model_config`   | JSON-encoded [`ModelConfig`]                      |
//! | `train_state`    | optional, JSON written by the trainer             |
//!
//! and its tensors are named `gen.<param>` and `disc.<param>`; trainer
//! checkpoints add optimizer moments under `opt.`. Files are written to a
//! temporary sibling and renamed into place.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::model::{Discriminators, Generator, ModelConfig};
use crate::{Error, Result};

pub const FORMAT_NAME: &str = "exprgen-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) const GEN_PREFIX: &str = "gen.";
pub(crate) const DISC_PREFIX: &str = "disc.";

/// Parsed checkpoint contents.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub dtype: DType,
    pub metadata: HashMap<String, String>,
    pub tensors: HashMap<String, Tensor>,
}

fn dtype_name(dtype: DType) -> Result<&'static str> {
    match dtype {
        DType::F32 => Ok("f32"),
        DType::F64 => Ok("f64"),
        other => Err(Error::Invalid(format!("unsupported parameter dtype {other:?}"))),
    }
}

pub(crate) fn write_checkpoint(
    path: &Path,
    config: &ModelConfig,
    dtype: DType,
    extra_metadata: &[(&str, String)],
    tensors: Vec<(String, Tensor)>,
) -> Result<()> {
    let mut meta = HashMap::new();
    meta.insert("format".to_string(), FORMAT_NAME.to_string());
    meta.insert("format_version".to_string(), FORMAT_VERSION.to_string());
    meta.insert("dtype".to_string(), dtype_name(dtype)?.to_string());
    meta.insert(
        "model_config".to_string(),
        serde_json::to_string(config).map_err(|e| Error::Invalid(e.to_string()))?,
    );
    for (k, v) in extra_metadata {
        meta.insert(k.to_string(), v.clone());
    }
    let tensors = tensors
        .into_iter()
        .map(|(k, t)| Ok((k, t.contiguous()?)))
        .collect::<Result<Vec<_>>>()?;
    let bytes = safetensors::serialize(tensors, Some(meta)).map_err(|e| Error::Invalid(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |msg: String| Error::CorruptCheckpoint(format!("{}: {msg}", path.display()));
    let (_, header) = safetensors::SafeTensors::read_metadata(&bytes).map_err(|e| corrupt(e.to_string()))?;
    let metadata = header.metadata().clone().unwrap_or_default();
    if metadata.get("format").map(String::as_str) != Some(FORMAT_NAME) {
        return Err(corrupt("not an exprgen checkpoint".into()));
    }
    let version = metadata.get("format_version").cloned().unwrap_or_default();
    if version != FORMAT_VERSION.to_string() {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dtype = match metadata.get("dtype").map(String::as_str) {
        Some("f32") => DType::F32,
        Some("f64") => DType::F64,
        other => return Err(corrupt(format!("bad dtype {other:?}"))),
    };
    let config: ModelConfig = serde_json::from_str(
        metadata
            .get("model_config")
            .ok_or_else(|| corrupt("missing model_config".into()))?,
    )
    .map_err(|e| corrupt(e.to_string()))?;
    let tensors = candle_core::safetensors::load_buffer(&bytes, &Device::Cpu).map_err(|e| corrupt(e.to_string()))?;
    Ok(Checkpoint {
        config,
        dtype,
        metadata,
        tensors,
    })
}

/// Writes generator and discriminator parameters with the architecture block.
pub fn save_params(path: &Path, generator: &Generator, discriminators: &Discriminators) -> Result<()> {
    let mut tensors = generator.params().prefixed_tensors(GEN_PREFIX);
    tensors.extend(discriminators.params().prefixed_tensors(DISC_PREFIX));
    write_checkpoint(path, generator.config(), generator.dtype(), &[], tensors)
}

/// Rebuilds both networks from a checkpoint.
pub fn load_params(path: &Path) -> Result<(Generator, Discriminators)> {
    let ckpt = read_checkpoint(path)?;
    networks_from(&ckpt)
}

pub(crate) fn networks_from(ckpt: &Checkpoint) -> Result<(Generator, Discriminators)> {
    let generator = Generator::new(ckpt.config.clone(), ckpt.dtype, 0)?;
    let discriminators = Discriminators::new(&ckpt.config, ckpt.dtype, 0)?;
    generator.params().load_prefixed(&ckpt.tensors, GEN_PREFIX)?;
    discriminators.params().load_prefixed(&ckpt.tensors, DISC_PREFIX)?;
    Ok((generator, discriminators))
}

/// Loads a checkpoint into existing networks, which must share its architecture.
pub fn load_params_into(path: &Path, generator: &Generator, discriminators: &Discriminators) -> Result<()> {
    let ckpt = read_checkpoint(path)?;
    if let Some(diff) = generator.config().mismatch(&ckpt.config) {
        return Err(Error::ArchitectureMismatch(diff));
    }
    generator.params().load_prefixed(&ckpt.tensors, GEN_PREFIX)?;
    discriminators.params().load_prefixed(&ckpt.tensors, DISC_PREFIX)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EmotionSet;

    fn nets(n: usize, seed: u64) -> (Generator, Discriminators) {
        let names: Vec<String> = (0..n).map(|i| format!("e{i}")).collect();
        let cfg = ModelConfig::scaled(EmotionSet::new(names).unwrap(), 16, 3, 4, 8);
        (
            Generator::new(cfg.clone(), DType::F32, seed).unwrap(),
            Discriminators::new(&cfg, DType::F32, seed + 1).unwrap(),
        )
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.safetensors");
        let (g, d) = nets(2, 5);
        save_params(&p, &g, &d).unwrap();
        let (g2, d2) = load_params(&p).unwrap();
        assert_eq!(g.params().checksum().unwrap(), g2.params().checksum().unwrap());
        assert_eq!(d.params().checksum().unwrap(), d2.params().checksum().unwrap());
        assert_eq!(g.params().num_values(), g2.params().num_values());
        assert_eq!(g2.config(), g.config());
    }

    #[test]
    fn architecture_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.safetensors");
        let (g, d) = nets(2, 5);
        save_params(&p, &g, &d).unwrap();
        let (g3, d3) = nets(3, 5);
        let err = load_params_into(&p, &g3, &d3).unwrap_err();
        assert!(matches!(err, Error::ArchitectureMismatch(_)), "{err}");
        assert!(err.to_string().starts_with("architecture mismatch"));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.safetensors");
        let (g, d) = nets(1, 5);
        save_params(&p, &g, &d).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_params(&p).unwrap_err();
        assert!(matches!(err, Error::CorruptCheckpoint(_)), "{err}");
        std::fs::write(&p, &bytes[..4]).unwrap();
        assert!(matches!(load_params(&p), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn version_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("m.safetensors");
        let (g, _) = nets(1, 5);
        write_checkpoint(
            &p,
            g.config(),
            DType::F32,
            &[("format_version", "99".to_string())],
            g.params().prefixed_tensors(GEN_PREFIX),
        )
        .unwrap();
        assert!(matches!(load_params(&p), Err(Error::CheckpointVersion { .. })));
    }
}
