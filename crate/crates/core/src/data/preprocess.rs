use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FrameImage, LandmarkSet};
use crate::{Error, Result};

/// Random crops are redrawn this many times when a landmark would fall outside.
pub const CROP_RETRIES: usize = 8;

/// Resize-then-crop geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropGeometry {
    pub resize: usize,
    pub crop: usize,
}

impl Default for CropGeometry {
    fn default() -> Self {
        Self { resize: 289, crop: 256 }
    }
}

impl CropGeometry {
    /// Keeps the 289:256 ratio for a different model input size.
    pub fn for_input_size(crop: usize) -> Self {
        Self {
            resize: (crop * 289 + 128) / 256,
            crop,
        }
    }

    pub fn center_offset(&self) -> (usize, usize) {
        let o = (self.resize - self.crop) / 2;
        (o, o)
    }
}

/// Maps a point from an `h x w` image into the resized-and-cropped frame.
pub fn transform_point(p: [f64; 2], src: (usize, usize), geo: CropGeometry, offset: (usize, usize)) -> [f64; 2] {
    let (h, w) = src;
    let sx = geo.resize as f64 / w as f64;
    let sy = geo.resize as f64 / h as f64;
    [
        (p[0] + 0.5) * sx - 0.5 - offset.0 as f64,
        (p[1] + 0.5) * sy - 0.5 - offset.1 as f64,
    ]
}

/// Resizes both frames to `geo.resize` and cuts the same `geo.crop` window from each
/// at `offset = (left, top)`; landmarks follow the same transform.
pub fn crop_pair_at(
    input: &FrameImage,
    target: &FrameImage,
    target_landmarks: &LandmarkSet,
    geo: CropGeometry,
    offset: (usize, usize),
) -> Result<(FrameImage, FrameImage, LandmarkSet)> {
    let src = (target.height(), target.width());
    let ri = input.resize(geo.resize, geo.resize);
    let rt = target.resize(geo.resize, geo.resize);
    let (left, top) = offset;
    let lm = target_landmarks.map(|p| transform_point(p, src, geo, offset));
    Ok((
        ri.crop(top, left, geo.crop, geo.crop)?,
        rt.crop(top, left, geo.crop, geo.crop)?,
        lm,
    ))
}

/// Resize + crop for a training pair.
///
/// With `training` set, the crop offset is drawn from `seed`, redrawn up to
/// [`CROP_RETRIES`] times while any landmark leaves the window, and otherwise
/// falls back to the center crop. Without it the center crop is used directly.
/// Landmarks are clamped into the frame after a fallback.
pub fn preprocess_pair(
    input: &FrameImage,
    target: &FrameImage,
    target_landmarks: &LandmarkSet,
    geo: CropGeometry,
    training: bool,
    seed: u64,
) -> Result<(FrameImage, FrameImage, LandmarkSet)> {
    if input.height() != target.height() || input.width() != target.width() {
        return Err(Error::Shape("input and target frames differ in size".into()));
    }
    if geo.crop > geo.resize || geo.crop == 0 {
        return Err(Error::Config(format!("crop {} larger than resize {}", geo.crop, geo.resize)));
    }
    let src = (target.height(), target.width());
    let fits = |offset| {
        target_landmarks
            .map(|p| transform_point(p, src, geo, offset))
            .within(geo.crop, geo.crop)
    };
    let mut offset = geo.center_offset();
    if training {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = geo.resize - geo.crop;
        for _ in 0..CROP_RETRIES {
            let cand = (rng.random_range(0..=span), rng.random_range(0..=span));
            if fits(cand) {
                offset = cand;
                break;
            }
        }
    }
    let (i, t, lm) = crop_pair_at(input, target, target_landmarks, geo, offset)?;
    let hi = (geo.crop - 1) as f64;
    Ok((i, t, lm.map(|[x, y]| [x.clamp(0.0, hi), y.clamp(0.0, hi)])))
}

/// Center square crop followed by a resize to `size x size`, for arbitrary user images.
pub fn fit_to_input(frame: &FrameImage, size: usize) -> Result<FrameImage> {
    let side = frame.height().min(frame.width());
    let top = (frame.height() - side) / 2;
    let left = (frame.width() - side) / 2;
    Ok(frame.crop(top, left, side, side)?.resize(size, size))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(size: usize) -> FrameImage {
        let mut img = FrameImage::filled(size, size, [0.0; 3]);
        for y in 0..size {
            for x in 0..size {
                img.set(y, x, [x as f32 / size as f32, y as f32 / size as f32, 0.5]);
            }
        }
        img
    }

    fn lm_at(p: [f64; 2]) -> LandmarkSet {
        LandmarkSet::new(vec![p; 68]).unwrap()
    }

    #[test]
    fn default_geometry_center_offset() {
        let g = CropGeometry::default();
        assert_eq!(g.center_offset(), (16, 16));
        assert_eq!(CropGeometry::for_input_size(256), g);
        assert_eq!(CropGeometry::for_input_size(64), CropGeometry { resize: 72, crop: 64 });
    }

    #[test]
    fn top_left_window_and_out_of_crop_landmark() {
        let img = ramp(289);
        let lm = lm_at([100.0, 50.0]);
        let (a, b, l) = crop_pair_at(&img, &img, &lm, CropGeometry::default(), (0, 0)).unwrap();
        assert_eq!(a, img.crop(0, 0, 256, 256).unwrap());
        assert_eq!(a, b);
        assert_eq!(l.points()[0], [100.0, 50.0]);
        let far = lm_at([288.0, 288.0]);
        let (_, _, l) = crop_pair_at(&img, &img, &far, CropGeometry::default(), (0, 0)).unwrap();
        assert!(!l.within(256, 256));
    }

    #[test]
    fn out_of_crop_landmark_forces_retry() {
        // (288, 288) only fits the crop at offset (33, 33); eight draws almost never hit it,
        // so the result must be either that exact window or the center fallback.
        let img = ramp(289);
        let lm = lm_at([288.0, 288.0]);
        let (a, _, l) = preprocess_pair(&img, &img, &lm, CropGeometry::default(), true, 3).unwrap();
        let center = img.crop(16, 16, 256, 256).unwrap();
        let corner = img.crop(33, 33, 256, 256).unwrap();
        assert!(a == center || a == corner);
        assert!(l.within(256, 256));
    }

    #[test]
    fn eval_mode_uses_center_crop() {
        let img = ramp(289);
        let lm = lm_at([144.0, 144.0]);
        let (a, _, l) = preprocess_pair(&img, &img, &lm, CropGeometry::default(), false, 0).unwrap();
        assert_eq!(a, img.crop(16, 16, 256, 256).unwrap());
        assert_eq!(l.points()[0], [128.0, 128.0]);
    }

    #[test]
    fn same_seed_same_crop() {
        let img = ramp(300);
        let lm = lm_at([150.0, 150.0]);
        let g = CropGeometry::default();
        let r1 = preprocess_pair(&img, &img, &lm, g, true, 42).unwrap();
        let r2 = preprocess_pair(&img, &img, &lm, g, true, 42).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        let lm = lm_at([1.0, 1.0]);
        assert!(preprocess_pair(&ramp(64), &ramp(65), &lm, CropGeometry::for_input_size(64), false, 0).is_err());
    }

    #[test]
    fn fit_to_input_squares_and_resizes() {
        let img = FrameImage::filled(40, 80, [0.2, 0.4, 0.6]);
        let out = fit_to_input(&img, 16).unwrap();
        assert_eq!((out.height(), out.width()), (16, 16));
    }
}
