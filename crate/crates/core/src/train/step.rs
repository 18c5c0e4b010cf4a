//! Differentiable pieces of one training step.

use candle_core::{DType, Device, Tensor};

use crate::data::{TrainingPair, NUM_LANDMARKS};
use crate::model::{Discriminators, Generator, Which};
use crate::objectives::{
    disc_adv_loss_tensor, gen_adv_loss_tensor, landmark_l2_tensor, recon_l1_tensor, temporal_reg_tensor, LossTerms,
    LossWeights,
};
use crate::train::Ablations;
use crate::{Error, Result};

/// A batch of training pairs stacked into tensors.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Tensor,
    /// `(N, 1, H, W)` mouth masks with values 0 or 1.
    pub masks: Tensor,
    /// `(N, 68, 2)` target landmarks in pixels.
    pub landmarks: Tensor,
    /// One `(N,)` degree column per emotion; `None` where no sample uses the emotion.
    pub degrees: Vec<Option<Tensor>>,
    /// Degrees moved down and up by `delta_a` on each sample's own emotion, clamped to `[0, 1]`.
    pub minus: Vec<Option<Tensor>>,
    pub plus: Vec<Option<Tensor>>,
}

impl Batch {
    pub fn from_pairs(pairs: &[TrainingPair], n_emotions: usize, delta_a: f64, dtype: DType) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dev = Device::Cpu;
        let stack = |f: &dyn Fn(&TrainingPair) -> Result<Tensor>| -> Result<Tensor> {
            let ts = pairs.iter().map(f).collect::<Result<Vec<_>>>()?;
            Ok(Tensor::cat(&ts, 0)?)
        };
        let inputs = stack(&|p| p.input.to_tensor(&dev, dtype))?;
        let targets = stack(&|p| p.target.to_tensor(&dev, dtype))?;
        let masks = stack(&|p| {
            let m = &p.mask;
            let v: Vec<f32> = m.values().iter().map(|&x| x as f32).collect();
            Ok(Tensor::from_vec(v, (1, 1, m.height(), m.width()), &dev)?.to_dtype(dtype)?)
        })?;
        let landmarks = stack(&|p| {
            Ok(Tensor::from_vec(p.landmarks.flatten(), (1, NUM_LANDMARKS, 2), &dev)?.to_dtype(dtype)?)
        })?;
        let column = |shift: f64| -> Result<Vec<Option<Tensor>>> {
            (1..=n_emotions)
                .map(|e| {
                    if pairs.iter().all(|p| p.emotion.index != e) {
                        return Ok(None);
                    }
                    let v: Vec<f64> = pairs
                        .iter()
                        .map(|p| {
                            if p.emotion.index == e {
                                (p.degree + shift).clamp(0.0, 1.0)
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    Ok(Some(Tensor::from_vec(v, pairs.len(), &dev)?.to_dtype(dtype)?))
                })
                .collect()
        };
        Ok(Self {
            inputs,
            targets,
            masks,
            landmarks,
            degrees: column(0.0)?,
            minus: column(-delta_a)?,
            plus: column(delta_a)?,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.dim(0).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Generator outputs needed by both updates of a step.
#[derive(Debug, Clone)]
pub struct GeneratorForward {
    pub frames: Tensor,
    pub landmarks: Tensor,
    /// Frames at the perturbed degrees, when the temporal term is active.
    pub neighbors: Option<(Tensor, Tensor)>,
}

/// Runs the generator on a batch. The encoders run once; the decoder runs
/// separately for each degree vector.
pub fn generator_forward(generator: &Generator, batch: &Batch, with_temporal: bool) -> Result<GeneratorForward> {
    let base = generator.encode_base(&batch.inputs)?;
    let residuals = batch
        .degrees
        .iter()
        .enumerate()
        .filter(|(_, d)| d.is_some())
        .map(|(i, _)| Ok((i + 1, generator.encode_residual(i + 1, &batch.inputs)?)))
        .collect::<Result<Vec<_>>>()?;
    let out = generator.decode_batch(&base, &residuals, &batch.degrees)?;
    let neighbors = if with_temporal {
        let minus = generator.decode_batch(&base, &residuals, &batch.minus)?;
        let plus = generator.decode_batch(&base, &residuals, &batch.plus)?;
        Some((minus.frame, plus.frame))
    } else {
        None
    };
    Ok(GeneratorForward {
        frames: out.frame,
        landmarks: out.landmarks,
        neighbors,
    })
}

/// Discriminator-side losses for real targets against `fake` frames.
pub fn discriminator_losses(
    discriminators: &Discriminators,
    fake: &Tensor,
    batch: &Batch,
    use_local: bool,
) -> Result<(Tensor, Option<Tensor>)> {
    let global = disc_adv_loss_tensor(
        &discriminators.discriminate(Which::Global, fake)?,
        &discriminators.discriminate(Which::Global, &batch.targets)?,
    )?;
    let local = if use_local {
        let fake_m = fake.broadcast_mul(&batch.masks)?;
        let real_m = batch.targets.broadcast_mul(&batch.masks)?;
        Some(disc_adv_loss_tensor(
            &discriminators.discriminate(Which::Local, &fake_m)?,
            &discriminators.discriminate(Which::Local, &real_m)?,
        )?)
    } else {
        None
    };
    Ok((global, local))
}

/// Generator-side loss terms; disabled terms are `None` and never computed.
#[derive(Debug, Clone)]
pub struct GeneratorLosses {
    pub adv_global: Tensor,
    pub adv_local: Option<Tensor>,
    pub recon: Tensor,
    pub landmark: Option<Tensor>,
    pub temporal: Option<Tensor>,
}

pub fn generator_losses(
    discriminators: &Discriminators,
    forward: &GeneratorForward,
    batch: &Batch,
    ablations: &Ablations,
) -> Result<GeneratorLosses> {
    let adv_global = gen_adv_loss_tensor(&discriminators.discriminate(Which::Global, &forward.frames)?)?;
    let adv_local = if ablations.use_local_disc {
        let masked = forward.frames.broadcast_mul(&batch.masks)?;
        Some(gen_adv_loss_tensor(&discriminators.discriminate(Which::Local, &masked)?)?)
    } else {
        None
    };
    let recon = recon_l1_tensor(&forward.frames, &batch.targets)?;
    let landmark = if ablations.use_landmark_loss {
        Some(landmark_l2_tensor(&forward.landmarks, &batch.landmarks)?)
    } else {
        None
    };
    let temporal = match (&forward.neighbors, ablations.use_temporal_reg) {
        (Some((minus, plus)), true) => Some(temporal_reg_tensor(&forward.frames, minus, plus)?),
        _ => None,
    };
    Ok(GeneratorLosses {
        adv_global,
        adv_local,
        recon,
        landmark,
        temporal,
    })
}

pub(crate) fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

fn opt_scalar(t: &Option<Tensor>) -> Result<f64> {
    t.as_ref().map(scalar).unwrap_or(Ok(0.0))
}

impl GeneratorLosses {
    pub fn terms(&self) -> Result<LossTerms> {
        Ok(LossTerms {
            adv_global: scalar(&self.adv_global)?,
            adv_local: opt_scalar(&self.adv_local)?,
            recon: scalar(&self.recon)?,
            landmark: opt_scalar(&self.landmark)?,
            temporal: opt_scalar(&self.temporal)?,
        })
    }

    /// Weighted sum of the computed terms.
    pub fn total(&self, weights: &LossWeights) -> Result<Tensor> {
        let mut total = (self.adv_global.affine(weights.w_global, 0.0)? + self.recon.affine(weights.w_recon, 0.0)?)?;
        for (t, w) in [
            (&self.adv_local, weights.w_local),
            (&self.landmark, weights.w_landmark),
            (&self.temporal, weights.w_temporal),
        ] {
            if let Some(t) = t {
                total = (total + t.affine(w, 0.0)?)?;
            }
        }
        Ok(total)
    }
}
