//! Training losses.
//!
//! Scalar versions operate on plain values and images; the `*_tensor`
//! versions are the differentiable forms used by the trainer and reduce by
//! mean over pixels and over the batch.
//!
//! Adversarial terms follow the non-saturating convention: discriminators
//! minimize `-log D(real) - log(1 - D(fake))`, the generator minimizes
//! `-log D(fake)`. Scores are clamped to `[LOG_EPS, 1 - LOG_EPS]` before the log.

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::data::{FrameImage, LandmarkSet};
use crate::model::ActionVector;
use crate::{Error, Result};

pub const LOG_EPS: f64 = 1e-8;

/// Added under the square root of the landmark distance so its gradient stays finite at zero.
const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub w_global: f64,
    pub w_local: f64,
    pub w_recon: f64,
    pub w_landmark: f64,
    pub w_temporal: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_global: 1.0,
            w_local: 1.0,
            w_recon: 100.0,
            w_landmark: 1.0,
            w_temporal: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_global, self.w_local, self.w_recon, self.w_landmark, self.w_temporal];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("loss weights must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalRegConfig {
    pub delta_a: f64,
}

impl Default for TemporalRegConfig {
    fn default() -> Self {
        Self { delta_a: 0.1 }
    }
}

impl TemporalRegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_a > 0.0 && self.delta_a <= 1.0) {
            return Err(Error::Config(format!("delta_a {} not in (0, 1]", self.delta_a)));
        }
        Ok(())
    }
}

/// Generator-side term values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub adv_global: f64,
    pub adv_local: f64,
    pub recon: f64,
    pub landmark: f64,
    pub temporal: f64,
}

/// Discriminator-side term values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscTerms {
    pub global: f64,
    pub local: f64,
}

/// Per-step values of every term with the weighted totals; serializes to a flat record.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(flatten)]
    pub terms: LossTerms,
    pub disc_global: f64,
    pub disc_local: f64,
    pub gen_total: f64,
    pub disc_total: f64,
}

impl LossReport {
    pub fn new(terms: LossTerms, disc: DiscTerms, weights: &LossWeights) -> Result<Self> {
        Ok(Self {
            terms,
            disc_global: disc.global,
            disc_local: disc.local,
            gen_total: generator_objective(&terms, weights)?,
            disc_total: discriminator_objective(&disc, weights)?,
        })
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteTerm(name))
    }
}

/// `w_global*adv_g + w_local*adv_l + w_recon*L_r + w_landmark*L_k + w_temporal*R_t`.
pub fn generator_objective(terms: &LossTerms, weights: &LossWeights) -> Result<f64> {
    Ok(weights.w_global * check_finite("adv_global", terms.adv_global)?
        + weights.w_local * check_finite("adv_local", terms.adv_local)?
        + weights.w_recon * check_finite("recon", terms.recon)?
        + weights.w_landmark * check_finite("landmark", terms.landmark)?
        + weights.w_temporal * check_finite("temporal", terms.temporal)?)
}

/// `w_global*adv_D_global + w_local*adv_D_local`.
pub fn discriminator_objective(terms: &DiscTerms, weights: &LossWeights) -> Result<f64> {
    Ok(weights.w_global * check_finite("disc_global", terms.global)?
        + weights.w_local * check_finite("disc_local", terms.local)?)
}

fn clamp_score(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Invalid(format!("score {s} outside (0, 1)")));
    }
    Ok(s.clamp(LOG_EPS, 1.0 - LOG_EPS))
}

/// `-log D(real) - log(1 - D(fake))`.
pub fn adv_loss_discriminator(score_fake: f64, score_real: f64) -> Result<f64> {
    Ok(-clamp_score(score_real)?.ln() - (1.0 - clamp_score(score_fake)?).ln())
}

/// `-log D(fake)`.
pub fn adv_loss_generator(score_fake: f64) -> Result<f64> {
    Ok(-clamp_score(score_fake)?.ln())
}

/// Mean absolute difference over pixels and channels.
pub fn recon_l1(generated: &FrameImage, target: &FrameImage) -> Result<f64> {
    if generated.height() != target.height() || generated.width() != target.width() {
        return Err(Error::Shape("images differ in size".into()));
    }
    let n = generated.pixels().len() as f64;
    Ok(generated
        .pixels()
        .iter()
        .zip(target.pixels())
        .map(|(a, b)| (a - b).abs() as f64)
        .sum::<f64>()
        / n)
}

/// Euclidean norm of the flattened coordinate difference.
pub fn landmark_distance(predicted: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Landmarks(format!(
            "point counts differ: {} vs {}",
            predicted.len(),
            truth.len()
        )));
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2))
        .sum::<f64>()
        .sqrt())
}

pub fn landmark_l2(predicted: &LandmarkSet, truth: &LandmarkSet) -> Result<f64> {
    landmark_distance(predicted.points(), truth.points())
}

/// The degree vectors one step below and above `a`, clamped to `[0, 1]`.
///
/// The non-zero entries are perturbed; a zero vector has every entry perturbed.
pub fn temporal_neighbors(a: &ActionVector, delta: f64) -> Result<(ActionVector, ActionVector)> {
    let all_zero = a.values().iter().all(|&v| v == 0.0);
    let shift = |sign: f64| {
        ActionVector::new(
            a.values()
                .iter()
                .map(|&v| {
                    if v != 0.0 || all_zero {
                        (v + sign * delta).clamp(0.0, 1.0)
                    } else {
                        v
                    }
                })
                .collect(),
        )
    };
    Ok((shift(-1.0)?, shift(1.0)?))
}

/// `|V(a) - V(a-)|_1 + |V(a) - V(a+)|_1` with mean reduction; the three frames are
/// produced by independent calls to `generate`.
pub fn temporal_reg<F>(mut generate: F, a: &ActionVector, cfg: &TemporalRegConfig) -> Result<f64>
where
    F: FnMut(&ActionVector) -> Result<FrameImage>,
{
    cfg.validate()?;
    let (minus, plus) = temporal_neighbors(a, cfg.delta_a)?;
    let v = generate(a)?;
    let vm = generate(&minus)?;
    let vp = generate(&plus)?;
    Ok(recon_l1(&v, &vm)? + recon_l1(&v, &vp)?)
}

fn clamped_log(x: &Tensor) -> Result<Tensor> {
    Ok(x.clamp(LOG_EPS, 1.0 - LOG_EPS)?.log()?)
}

/// Batch mean of `-log D(real) - log(1 - D(fake))` over `(N,)` scores.
pub fn disc_adv_loss_tensor(score_fake: &Tensor, score_real: &Tensor) -> Result<Tensor> {
    let real = clamped_log(score_real)?.neg()?;
    let fake = clamped_log(&score_fake.affine(-1.0, 1.0)?)?.neg()?;
    Ok((real + fake)?.mean_all()?)
}

/// Batch mean of `-log D(fake)`.
pub fn gen_adv_loss_tensor(score_fake: &Tensor) -> Result<Tensor> {
    Ok(clamped_log(score_fake)?.neg()?.mean_all()?)
}

pub fn recon_l1_tensor(generated: &Tensor, target: &Tensor) -> Result<Tensor> {
    if generated.dims() != target.dims() {
        return Err(Error::Shape(format!("{:?} vs {:?}", generated.dims(), target.dims())));
    }
    Ok((generated - target)?.abs()?.mean_all()?)
}

/// Batch mean of the per-sample landmark distance for `(N, K, 2)` coordinates.
pub fn landmark_l2_tensor(predicted: &Tensor, truth: &Tensor) -> Result<Tensor> {
    if predicted.dims() != truth.dims() {
        return Err(Error::Shape(format!("{:?} vs {:?}", predicted.dims(), truth.dims())));
    }
    let sq = (predicted - truth)?.sqr()?.sum((1, 2))?;
    Ok((sq + NORM_EPS)?.sqrt()?.mean_all()?)
}

pub fn temporal_reg_tensor(center: &Tensor, minus: &Tensor, plus: &Tensor) -> Result<Tensor> {
    Ok((recon_l1_tensor(center, minus)? + recon_l1_tensor(center, plus)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn discriminator_loss_values() {
        assert!(close(adv_loss_discriminator(0.5, 0.5).unwrap(), 2.0 * 2f64.ln(), 1e-12));
        assert!(close(adv_loss_discriminator(0.5, 0.5).unwrap(), 1.3863, 1e-4));
        assert!(adv_loss_discriminator(1e-12, 1.0 - 1e-12).unwrap() < 1e-7);
        let v = adv_loss_discriminator(0.5, 0.0).unwrap();
        assert!(v.is_finite() && close(v, -(1e-8f64).ln() + 2f64.ln(), 1e-9));
        assert!(adv_loss_discriminator(1.5, 0.5).is_err());
        assert!(adv_loss_discriminator(0.5, f64::NAN).is_err());
    }

    #[test]
    fn generator_loss_values() {
        assert!(close(adv_loss_generator(0.5).unwrap(), std::f64::consts::LN_2, 1e-4));
        assert!(adv_loss_generator(1.0).unwrap() < 1e-7);
        let v = adv_loss_generator(0.0).unwrap();
        assert!(v.is_finite() && v > 18.0);
    }

    #[test]
    fn recon_values() {
        let a = FrameImage::filled(4, 4, [1.0; 3]);
        let b = FrameImage::filled(4, 4, [0.0; 3]);
        let c = FrameImage::filled(4, 4, [0.25, 0.5, 0.75]);
        assert_eq!(recon_l1(&a, &a).unwrap(), 0.0);
        assert_eq!(recon_l1(&a, &b).unwrap(), 1.0);
        assert_eq!(recon_l1(&a, &c).unwrap(), recon_l1(&c, &a).unwrap());
        assert!(recon_l1(&a, &FrameImage::filled(4, 5, [0.0; 3])).is_err());
    }

    #[test]
    fn landmark_values() {
        let base: Vec<[f64; 2]> = (0..68).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let l = LandmarkSet::new(base.clone()).unwrap();
        assert_eq!(landmark_l2(&l, &l).unwrap(), 0.0);
        let mut one = base.clone();
        one[5] = [one[5][0] + 3.0, one[5][1] + 4.0];
        assert_eq!(landmark_l2(&LandmarkSet::new(one).unwrap(), &l).unwrap(), 5.0);
        let shifted = l.map(|[x, y]| [x + 1.0, y]);
        assert!(close(landmark_l2(&shifted, &l).unwrap(), 68f64.sqrt(), 1e-12));
        assert!(close(68f64.sqrt(), 8.2462, 1e-4));
        assert!(landmark_distance(&base[..3], &base[..4]).is_err());
    }

    fn ramp_generator(a: &ActionVector) -> Result<FrameImage> {
        Ok(FrameImage::filled(3, 3, [a.values()[0] as f32; 3]))
    }

    #[test]
    fn temporal_reg_values() {
        let cfg = TemporalRegConfig::default();
        let constant = |_: &ActionVector| Ok(FrameImage::filled(3, 3, [0.3; 3]));
        assert_eq!(temporal_reg(constant, &ActionVector::new(vec![0.5]).unwrap(), &cfg).unwrap(), 0.0);
        let v = temporal_reg(ramp_generator, &ActionVector::new(vec![0.5]).unwrap(), &cfg).unwrap();
        assert!(close(v, 0.2, 1e-6));
        // At a = 0 the backward neighbour clamps to 0; only the forward step contributes.
        let v = temporal_reg(ramp_generator, &ActionVector::zeros(1), &cfg).unwrap();
        assert!(close(v, 0.1, 1e-6));
        let v = temporal_reg(ramp_generator, &ActionVector::new(vec![1.0]).unwrap(), &cfg).unwrap();
        assert!(close(v, 0.1, 1e-6));
        assert!(temporal_reg(ramp_generator, &ActionVector::zeros(1), &TemporalRegConfig { delta_a: 0.0 }).is_err());
    }

    #[test]
    fn neighbors_touch_only_active_entries() {
        let a = ActionVector::new(vec![0.0, 0.95, 0.0]).unwrap();
        let (m, p) = temporal_neighbors(&a, 0.1).unwrap();
        assert!(close(m.values()[1], 0.85, 1e-12));
        assert_eq!(p.values(), &[0.0, 1.0, 0.0]);
        assert_eq!(m.values()[0], 0.0);
    }

    #[test]
    fn objectives_are_linear_in_weights() {
        let t = LossTerms { adv_global: 1.0, adv_local: 1.0, recon: 1.0, landmark: 1.0, temporal: 1.0 };
        let zero = LossWeights { w_global: 0.0, w_local: 0.0, w_recon: 0.0, w_landmark: 0.0, w_temporal: 0.0 };
        let unit = LossWeights { w_global: 1.0, w_local: 1.0, w_recon: 1.0, w_landmark: 1.0, w_temporal: 1.0 };
        assert_eq!(generator_objective(&t, &zero).unwrap(), 0.0);
        assert_eq!(generator_objective(&t, &unit).unwrap(), 5.0);
        let t2 = LossTerms { recon: 0.37, ..t };
        let doubled = LossWeights { w_recon: 2.0, ..unit };
        assert!(close(
            generator_objective(&t2, &doubled).unwrap() - generator_objective(&t2, &unit).unwrap(),
            0.37,
            1e-12
        ));
        assert_eq!(discriminator_objective(&DiscTerms { global: 2.0, local: 3.0 }, &unit).unwrap(), 5.0);
        let bad = LossTerms { landmark: f64::INFINITY, ..t };
        assert!(matches!(generator_objective(&bad, &unit), Err(Error::NonFiniteTerm("landmark"))));
    }

    #[test]
    fn tensor_forms_match_scalars() {
        let d = Device::Cpu;
        let fake = Tensor::new(&[0.3f64, 0.6], &d).unwrap();
        let real = Tensor::new(&[0.8f64, 0.4], &d).unwrap();
        let t = disc_adv_loss_tensor(&fake, &real).unwrap().to_scalar::<f64>().unwrap();
        let s = (adv_loss_discriminator(0.3, 0.8).unwrap() + adv_loss_discriminator(0.6, 0.4).unwrap()) / 2.0;
        assert!(close(t, s, 1e-12));
        let g = gen_adv_loss_tensor(&fake).unwrap().to_scalar::<f64>().unwrap();
        assert!(close(g, (adv_loss_generator(0.3).unwrap() + adv_loss_generator(0.6).unwrap()) / 2.0, 1e-12));
        let p = Tensor::zeros((1, 68, 2), candle_core::DType::F64, &d).unwrap();
        let q = (p.clone() + 1.0).unwrap();
        let l = landmark_l2_tensor(&p, &q).unwrap().to_scalar::<f64>().unwrap();
        assert!(close(l, 136f64.sqrt(), 1e-9));
    }
}
