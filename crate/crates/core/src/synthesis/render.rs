use std::collections::BTreeSet;

use crate::data::{FrameImage, LandmarkSet};
use crate::model::{ActionVector, FeatureHierarchy, Generator};
use crate::synthesis::ActionSchedule;
use crate::{Error, Result};

/// Frames generated for a schedule, in schedule order.
#[derive(Debug, Clone)]
pub struct RenderedSequence {
    pub frames: Vec<FrameImage>,
    pub landmarks: Vec<LandmarkSet>,
    pub schedule: ActionSchedule,
}

impl RenderedSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Encodings of one input image, reusable across any number of action vectors.
#[derive(Debug, Clone)]
pub struct EncodedImage {
    base: FeatureHierarchy,
    residuals: Vec<(usize, FeatureHierarchy)>,
}

impl EncodedImage {
    /// Runs the base encoder and the residual encoders of `emotions` (1-based).
    pub fn new(generator: &Generator, image: &FrameImage, emotions: impl IntoIterator<Item = usize>) -> Result<Self> {
        let size = generator.config().input_size;
        if image.height() != size || image.width() != size {
            return Err(Error::Shape(format!(
                "input image is {}x{}, model expects {size}x{size}",
                image.width(),
                image.height()
            )));
        }
        let x = image.to_tensor(generator.device(), generator.dtype())?;
        let base = generator.encode_base(&x)?;
        let residuals = emotions
            .into_iter()
            .map(|i| Ok((i, generator.encode_residual(i, &x)?)))
            .collect::<Result<_>>()?;
        Ok(Self { base, residuals })
    }

    /// Encodes every emotion activated anywhere in `schedule`.
    pub fn for_schedule(generator: &Generator, image: &FrameImage, schedule: &ActionSchedule) -> Result<Self> {
        let active: BTreeSet<usize> = schedule.steps().iter().flat_map(|s| s.active().map(|(i, _)| i)).collect();
        Self::new(generator, image, active)
    }

    /// Decodes one frame.
    pub fn frame(&self, generator: &Generator, a: &ActionVector) -> Result<(FrameImage, LandmarkSet)> {
        let out = generator.decode_from(&self.base, &self.residuals, a)?;
        Ok((out.frame_image(0)?, out.landmark_set(0)?))
    }
}

/// One frame per schedule step. Each frame depends only on its own step and
/// the image.
pub fn render(generator: &Generator, image: &FrameImage, schedule: &ActionSchedule) -> Result<RenderedSequence> {
    schedule.check_width(generator.n_emotions())?;
    let encoded = EncodedImage::for_schedule(generator, image, schedule)?;
    let mut frames = Vec::with_capacity(schedule.len());
    let mut landmarks = Vec::with_capacity(schedule.len());
    for a in schedule.steps() {
        let (f, l) = encoded.frame(generator, a)?;
        frames.push(f);
        landmarks.push(l);
    }
    Ok(RenderedSequence {
        frames,
        landmarks,
        schedule: schedule.clone(),
    })
}
