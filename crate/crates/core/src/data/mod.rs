//! Clip ingestion, degree labeling, landmarks, mouth masks, preprocessing and
//! the procedural face dataset.

mod clip;
mod frame;
mod landmarks;
mod manifest;
mod mask;
mod preprocess;
mod sample;
pub mod synthetic;

pub use clip::{assign_action_coefficients, ExpressionClip};
pub use frame::FrameImage;
pub use landmarks::{FileLandmarks, LandmarkProvider, LandmarkSet, MOUTH, NUM_LANDMARKS};
pub use manifest::{
    frame_path, landmarks_path, load_manifest, ClipEntry, DatasetManifest, EmotionLabel, EmotionSet, Split,
};
pub use mask::{centroid_box_mask, convex_hull, mouth_mask, mouth_mask_or_box, MouthMask};
pub use preprocess::{crop_pair_at, fit_to_input, preprocess_pair, transform_point, CropGeometry, CROP_RETRIES};
pub use sample::{sample_training_pair, TrainingPair, TrainingSet};
pub use synthetic::{generate_synthetic_dataset, SyntheticConfig};
