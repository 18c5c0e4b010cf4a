use rand::Rng;

use crate::data::{
    mouth_mask_or_box, preprocess_pair, CropGeometry, DatasetManifest, EmotionLabel, ExpressionClip, FrameImage,
    LandmarkSet, MouthMask, Split,
};
use crate::{Error, Result};

/// One `(I, Y(a), a)` training example after preprocessing.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub input: FrameImage,
    pub target: FrameImage,
    pub degree: f64,
    pub emotion: EmotionLabel,
    pub landmarks: LandmarkSet,
    pub mask: MouthMask,
}

/// Clips of one split held in memory for sampling.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub n_emotions: usize,
    pub clips: Vec<ExpressionClip>,
}

impl TrainingSet {
    pub fn load(manifest: &DatasetManifest, split: Split) -> Result<Self> {
        let clips = manifest
            .split(split)
            .map(ExpressionClip::load)
            .collect::<Result<Vec<_>>>()?;
        Self::from_clips(manifest.n_emotions(), clips)
    }

    pub fn from_clips(n_emotions: usize, clips: Vec<ExpressionClip>) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(c) = clips.iter().find(|c| c.emotion.index == 0 || c.emotion.index > n_emotions) {
            return Err(Error::EmotionIndex {
                index: c.emotion.index,
                n: n_emotions,
            });
        }
        Ok(Self { n_emotions, clips })
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Picks a clip uniformly, pairs its first frame with a uniformly drawn frame `t`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, geo: CropGeometry, random_crop: bool) -> Result<TrainingPair> {
        let clip = &self.clips[rng.random_range(0..self.clips.len())];
        let t = rng.random_range(0..clip.len());
        let crop_seed: u64 = rng.random();
        self.pair_from(clip, t, geo, random_crop, crop_seed)
    }

    /// Builds the pair for frame index `t` (0-based) of `clip`.
    pub fn pair_from(
        &self,
        clip: &ExpressionClip,
        t: usize,
        geo: CropGeometry,
        random_crop: bool,
        crop_seed: u64,
    ) -> Result<TrainingPair> {
        let (input, target, landmarks) = preprocess_pair(
            &clip.frames[0],
            &clip.frames[t],
            &clip.landmarks[t],
            geo,
            random_crop,
            crop_seed,
        )?;
        let mask = mouth_mask_or_box(&landmarks, target.height(), target.width())?;
        Ok(TrainingPair {
            input,
            target,
            degree: clip.coefficients[t],
            emotion: clip.emotion.clone(),
            landmarks,
            mask,
        })
    }
}

/// Samples from a manifest's training split.
pub fn sample_training_pair<R: Rng + ?Sized>(
    manifest: &DatasetManifest,
    rng: &mut R,
    geo: CropGeometry,
) -> Result<TrainingPair> {
    TrainingSet::load(manifest, Split::Train)?.sample(rng, geo, true)
}
