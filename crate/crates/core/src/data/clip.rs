use crate::data::{ClipEntry, EmotionLabel, FileLandmarks, FrameImage, LandmarkProvider, LandmarkSet};
use crate::{Error, Result};

/// Degree labels for a clip of `num_frames` frames: frame `t` (1-based) gets `(t-1)/(T-1)`.
pub fn assign_action_coefficients(num_frames: usize) -> Result<Vec<f64>> {
    if num_frames < 2 {
        return Err(Error::ClipTooShort(num_frames));
    }
    let denom = (num_frames - 1) as f64;
    Ok((0..num_frames).map(|i| i as f64 / denom).collect())
}

/// A neutral-to-peak frame sequence with per-frame landmarks and degree labels.
#[derive(Debug, Clone)]
pub struct ExpressionClip {
    pub frames: Vec<FrameImage>,
    pub landmarks: Vec<LandmarkSet>,
    pub emotion: EmotionLabel,
    pub coefficients: Vec<f64>,
}

impl ExpressionClip {
    pub fn new(frames: Vec<FrameImage>, landmarks: Vec<LandmarkSet>, emotion: EmotionLabel) -> Result<Self> {
        if frames.len() != landmarks.len() {
            return Err(Error::Shape(format!(
                "{} frames but {} landmark sets",
                frames.len(),
                landmarks.len()
            )));
        }
        let coefficients = assign_action_coefficients(frames.len())?;
        Ok(Self {
            frames,
            landmarks,
            emotion,
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn load(entry: &ClipEntry) -> Result<Self> {
        Self::load_with(entry, &FileLandmarks)
    }

    pub fn load_with(entry: &ClipEntry, provider: &dyn LandmarkProvider) -> Result<Self> {
        let mut frames = Vec::with_capacity(entry.num_frames);
        let mut landmarks = Vec::with_capacity(entry.num_frames);
        for t in 1..=entry.num_frames {
            let path = entry.frame_path(t);
            let frame = FrameImage::load(&path)?;
            landmarks.push(provider.landmarks(&path, &frame)?);
            frames.push(frame);
        }
        if frames.iter().any(|f| f.height() != frames[0].height() || f.width() != frames[0].width()) {
            return Err(Error::Shape(format!(
                "frames of {} differ in size",
                entry.dir.display()
            )));
        }
        Self::new(frames, landmarks, entry.emotion.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_one_frames_midpoint() {
        let c = assign_action_coefficients(21).unwrap();
        assert_eq!(c.len(), 21);
        assert_eq!(c[0], 0.0);
        assert_eq!(c[1], 0.05);
        assert_eq!(c[10], 0.5);
        assert_eq!(c[20], 1.0);
    }

    #[test]
    fn two_frames_are_endpoints() {
        assert_eq!(assign_action_coefficients(2).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn single_frame_is_too_short() {
        assert!(matches!(assign_action_coefficients(1), Err(Error::ClipTooShort(1))));
        assert!(assign_action_coefficients(0).is_err());
    }

    #[test]
    fn coefficients_strictly_increase() {
        for t in 2..60 {
            let c = assign_action_coefficients(t).unwrap();
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            assert_eq!((c[0], c[t - 1]), (0.0, 1.0));
        }
    }
}
