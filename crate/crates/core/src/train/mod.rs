//! Alternating adversarial training with checkpointing and exact resume.
//!
//! Each step draws its batch from a random stream derived from the seed and
//! the step number, so the whole trajectory is determined by the config, the
//! data, and the step counter stored in a checkpoint.

mod adam;
mod config;
mod step;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::DType;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{CropGeometry, DatasetManifest, EmotionSet, Split, TrainingPair, TrainingSet};
use crate::model::checkpoint::{read_checkpoint, write_checkpoint, DISC_PREFIX, GEN_PREFIX};
use crate::model::{Discriminators, Generator, ModelConfig};
use crate::objectives::{DiscTerms, LossReport};
use crate::{Error, Result};

pub use adam::Adam;
pub use config::{Ablations, ScaleConfig, TrainConfig};
pub use step::{
    discriminator_losses, generator_forward, generator_losses, Batch, GeneratorForward, GeneratorLosses,
};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const BEST_FILE: &str = "best.safetensors";
const OPT_GEN_PREFIX: &str = "opt.gen.";
const OPT_DISC_PREFIX: &str = "opt.disc.";

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: u64,
    #[serde(flatten)]
    pub report: LossReport,
    /// Seconds spent in the step.
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SavedCounters {
    step: u64,
    gen_opt_steps: u64,
    disc_opt_steps: u64,
    best_recon: Option<f64>,
    config: TrainConfig,
}

/// Networks, optimizer moments and counters.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub generator: Generator,
    pub discriminators: Discriminators,
    pub gen_opt: Adam,
    pub disc_opt: Adam,
    /// Completed steps.
    pub step: u64,
    pub best_recon: Option<f64>,
}

fn dtype_of(config: &TrainConfig) -> DType {
    if config.double_precision {
        DType::F64
    } else {
        DType::F32
    }
}

impl TrainState {
    pub fn new(model: ModelConfig, config: &TrainConfig) -> Result<Self> {
        let dtype = dtype_of(config);
        let generator = Generator::new(model.clone(), dtype, config.seed)?;
        let discriminators = Discriminators::new(&model, dtype, config.seed.wrapping_add(1))?;
        let gen_opt = Adam::new(generator.params(), config.learning_rate, config.beta1, config.beta2)?;
        let disc_opt = Adam::new(discriminators.params(), config.learning_rate, config.beta1, config.beta2)?;
        Ok(Self {
            generator,
            discriminators,
            gen_opt,
            disc_opt,
            step: 0,
            best_recon: None,
        })
    }

    /// Writes a checkpoint that [`crate::model::load_params`] can also read.
    pub fn save(&self, path: &Path, config: &TrainConfig) -> Result<()> {
        let counters = SavedCounters {
            step: self.step,
            gen_opt_steps: self.gen_opt.steps(),
            disc_opt_steps: self.disc_opt.steps(),
            best_recon: self.best_recon,
            config: config.clone(),
        };
        let mut tensors = self.generator.params().prefixed_tensors(GEN_PREFIX);
        tensors.extend(self.discriminators.params().prefixed_tensors(DISC_PREFIX));
        tensors.extend(self.gen_opt.state_tensors(OPT_GEN_PREFIX));
        tensors.extend(self.disc_opt.state_tensors(OPT_DISC_PREFIX));
        let meta = serde_json::to_string(&counters).map_err(|e| Error::Invalid(e.to_string()))?;
        write_checkpoint(
            path,
            self.generator.config(),
            self.generator.dtype(),
            &[("train_state", meta)],
            tensors,
        )
    }

    /// Restores a state saved by [`TrainState::save`]. The architecture implied by
    /// `config` must match the checkpoint.
    pub fn load(path: &Path, config: &TrainConfig) -> Result<Self> {
        let ckpt = read_checkpoint(path)?;
        let expected = config.scale.model_config(ckpt.config.emotions.clone());
        if let Some(diff) = expected.mismatch(&ckpt.config) {
            return Err(Error::ArchitectureMismatch(diff));
        }
        if ckpt.dtype != dtype_of(config) {
            return Err(Error::ArchitectureMismatch(format!(
                "checkpoint holds {:?} parameters, config asks for {:?}",
                ckpt.dtype,
                dtype_of(config)
            )));
        }
        let counters: SavedCounters = serde_json::from_str(
            ckpt.metadata
                .get("train_state")
                .ok_or_else(|| Error::CorruptCheckpoint(format!("{}: no training state", path.display())))?,
        )
        .map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let (generator, discriminators) = crate::model::checkpoint::networks_from(&ckpt)?;
        let mut gen_opt = Adam::new(generator.params(), config.learning_rate, config.beta1, config.beta2)?;
        let mut disc_opt = Adam::new(discriminators.params(), config.learning_rate, config.beta1, config.beta2)?;
        gen_opt.load_state(&ckpt.tensors, OPT_GEN_PREFIX, counters.gen_opt_steps)?;
        disc_opt.load_state(&ckpt.tensors, OPT_DISC_PREFIX, counters.disc_opt_steps)?;
        Ok(Self {
            generator,
            discriminators,
            gen_opt,
            disc_opt,
            step: counters.step,
            best_recon: counters.best_recon,
        })
    }
}

/// Training loop over an in-memory training set.
#[derive(Debug)]
pub struct Trainer {
    config: TrainConfig,
    data: TrainingSet,
    geometry: CropGeometry,
    state: TrainState,
}

impl Trainer {
    pub fn new(config: TrainConfig, data: TrainingSet, emotions: EmotionSet) -> Result<Self> {
        config.validate()?;
        if emotions.len() != data.n_emotions {
            return Err(Error::Config(format!(
                "{} emotion names for a dataset with {} emotions",
                emotions.len(),
                data.n_emotions
            )));
        }
        let state = TrainState::new(config.scale.model_config(emotions), &config)?;
        Self::with_state(config, data, state)
    }

    pub fn from_manifest(manifest: &DatasetManifest, config: TrainConfig) -> Result<Self> {
        let data = TrainingSet::load(manifest, Split::Train)?;
        Self::new(config, data, manifest.emotions.clone())
    }

    pub fn with_state(config: TrainConfig, data: TrainingSet, state: TrainState) -> Result<Self> {
        config.validate()?;
        if state.generator.n_emotions() != data.n_emotions {
            return Err(Error::ArchitectureMismatch(format!(
                "model has {} emotions, dataset has {}",
                state.generator.n_emotions(),
                data.n_emotions
            )));
        }
        let geometry = CropGeometry::for_input_size(state.generator.config().input_size);
        Ok(Self {
            config,
            data,
            geometry,
            state,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn generator(&self) -> &Generator {
        &self.state.generator
    }

    /// One epoch is one pass over the training clips.
    pub fn steps_per_epoch(&self) -> u64 {
        self.data.len().div_ceil(self.config.batch_size) as u64
    }

    pub fn total_steps(&self) -> u64 {
        let full = self.config.epochs * self.steps_per_epoch();
        self.config.max_steps.map_or(full, |m| m.min(full))
    }

    pub fn epoch(&self) -> u64 {
        self.state.step / self.steps_per_epoch()
    }

    /// The pairs used by step `step` (0-based).
    pub fn sample_batch(&self, step: u64) -> Result<Vec<TrainingPair>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(2));
        rng.set_stream(step);
        (0..self.config.batch_size)
            .map(|_| self.data.sample(&mut rng, self.geometry, self.config.random_crop))
            .collect()
    }

    pub fn train_step(&mut self) -> Result<LossReport> {
        let pairs = self.sample_batch(self.state.step)?;
        self.train_step_on(&pairs)
    }

    /// One discriminator update followed by one generator update on `pairs`.
    pub fn train_step_on(&mut self, pairs: &[TrainingPair]) -> Result<LossReport> {
        let cfg = &self.config;
        let weights = cfg.effective_weights();
        let step_no = self.state.step + 1;
        let finite = |term: &'static str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteLoss { term, step: step_no })
            }
        };
        let st = &mut self.state;
        let batch = Batch::from_pairs(pairs, st.generator.n_emotions(), cfg.temporal.delta_a, st.generator.dtype())?;
        let forward = generator_forward(&st.generator, &batch, cfg.ablations.use_temporal_reg)?;

        let fake = forward.frames.detach();
        let (d_global, d_local) = discriminator_losses(&st.discriminators, &fake, &batch, cfg.ablations.use_local_disc)?;
        let disc = DiscTerms {
            global: finite("disc_global", step::scalar(&d_global)?)?,
            local: match &d_local {
                Some(t) => finite("disc_local", step::scalar(t)?)?,
                None => 0.0,
            },
        };
        let mut d_total = d_global.affine(weights.w_global, 0.0)?;
        if let Some(t) = &d_local {
            d_total = (d_total + t.affine(weights.w_local, 0.0)?)?;
        }
        let grads = d_total.backward()?;
        let use_local = cfg.ablations.use_local_disc;
        st.disc_opt
            .step(st.discriminators.params(), &grads, |name| use_local || !name.starts_with("local."))?;

        let losses = generator_losses(&st.discriminators, &forward, &batch, &cfg.ablations)?;
        let terms = losses.terms()?;
        finite("adv_global", terms.adv_global)?;
        finite("adv_local", terms.adv_local)?;
        finite("recon", terms.recon)?;
        finite("landmark", terms.landmark)?;
        finite("temporal", terms.temporal)?;
        let grads = losses.total(&weights)?.backward()?;
        st.gen_opt.step(st.generator.params(), &grads, |_| true)?;

        st.step += 1;
        LossReport::new(terms, disc, &weights)
    }

    /// Runs until [`Trainer::total_steps`], writing `train_log.jsonl` and
    /// checkpoints into `dir` when given.
    pub fn run(&mut self, dir: Option<&Path>) -> Result<Vec<StepRecord>> {
        let mut log = match dir {
            Some(d) => Some(open_log(d, self.state.step)?),
            None => None,
        };
        let total = self.total_steps();
        let mut records = Vec::new();
        let mut window = Vec::new();
        while self.state.step < total {
            let started = Instant::now();
            let report = self.train_step()?;
            let record = StepRecord {
                step: self.state.step,
                epoch: (self.state.step - 1) / self.steps_per_epoch(),
                report,
                wall_time: started.elapsed().as_secs_f64(),
            };
            if let Some((path, file)) = log.as_mut() {
                let line = serde_json::to_string(&record).map_err(|e| Error::Invalid(e.to_string()))?;
                writeln!(file, "{line}").map_err(|e| Error::io(path.as_path(), e))?;
            }
            if record.step.is_multiple_of(50) || record.step == 1 {
                log::info!(
                    "step {}/{} recon {:.4} landmark {:.3} temporal {:.4} d {:.3}",
                    record.step,
                    total,
                    report.terms.recon,
                    report.terms.landmark,
                    report.terms.temporal,
                    report.disc_total
                );
            }
            window.push(report.terms.recon);
            if let Some(d) = dir {
                if self.state.step.is_multiple_of(self.config.checkpoint_every) || self.state.step == total {
                    self.checkpoint(d, &window)?;
                    window.clear();
                }
            }
            records.push(record);
        }
        Ok(records)
    }

    fn checkpoint(&mut self, dir: &Path, window: &[f64]) -> Result<()> {
        let mean = window.iter().sum::<f64>() / window.len().max(1) as f64;
        let improved = !window.is_empty() && self.state.best_recon.is_none_or(|b| mean < b);
        if improved {
            self.state.best_recon = Some(mean);
        }
        self.state.save(&dir.join(checkpoint_name(self.state.step)), &self.config)?;
        if improved {
            self.state.save(&dir.join(BEST_FILE), &self.config)?;
        }
        let mut existing = list_checkpoints(dir)?;
        while existing.len() > self.config.keep_last.max(1) {
            let (_, old) = existing.remove(0);
            std::fs::remove_file(&old).map_err(|e| Error::io(&old, e))?;
        }
        Ok(())
    }
}

pub fn checkpoint_name(step: u64) -> String {
    format!("step_{step:08}.safetensors")
}

/// Step checkpoints in `dir`, oldest first.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("step_")?.strip_suffix(".safetensors")?.parse::<u64>().ok());
        if let Some(s) = step {
            found.push((s, path));
        }
    }
    found.sort();
    Ok(found)
}

/// Opens the log for appending, dropping records past `step` left by an
/// interrupted run.
fn open_log(dir: &Path, step: u64) -> Result<(PathBuf, std::fs::File)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(LOG_FILE);
    let kept = if step == 0 {
        String::new()
    } else {
        let text = std::fs::read_to_string(&path).unwrap_or_default();
        text.lines()
            .filter(|l| {
                serde_json::from_str::<StepRecord>(l).is_ok_and(|r| r.step <= step)
            })
            .map(|l| format!("{l}\n"))
            .collect()
    };
    std::fs::write(&path, kept).map_err(|e| Error::io(&path, e))?;
    let file = std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    Ok((path, file))
}

pub fn read_log(path: &Path) -> Result<Vec<StepRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Invalid(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Trains from scratch on the manifest's training split.
pub fn train(manifest: &DatasetManifest, config: TrainConfig, checkpoint_dir: &Path) -> Result<TrainState> {
    let mut trainer = Trainer::from_manifest(manifest, config)?;
    trainer.run(Some(checkpoint_dir))?;
    Ok(trainer.into_state())
}

/// Restores the latest step checkpoint in `checkpoint_dir`.
pub fn resume(checkpoint_dir: &Path, config: &TrainConfig) -> Result<TrainState> {
    if !checkpoint_dir.is_dir() {
        return Err(Error::io(
            checkpoint_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint directory not found"),
        ));
    }
    let (_, latest) = list_checkpoints(checkpoint_dir)?
        .pop()
        .ok_or_else(|| Error::CorruptCheckpoint(format!("no step checkpoints in {}", checkpoint_dir.display())))?;
    TrainState::load(&latest, config)
}

/// Continues training from the latest checkpoint in `checkpoint_dir`.
pub fn resume_training(manifest: &DatasetManifest, config: TrainConfig, checkpoint_dir: &Path) -> Result<TrainState> {
    let state = resume(checkpoint_dir, &config)?;
    if state.generator.config().emotions != manifest.emotions {
        return Err(Error::ArchitectureMismatch("checkpoint emotions differ from the manifest".into()));
    }
    let data = TrainingSet::load(manifest, Split::Train)?;
    let mut trainer = Trainer::with_state(config, data, state)?;
    trainer.run(Some(checkpoint_dir))?;
    Ok(trainer.into_state())
}
