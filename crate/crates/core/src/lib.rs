//! Controllable facial-expression video synthesis.
//!
//! A generator maps a neutral face image `I` and a per-emotion degree vector
//! `a in [0, 1]^n` to a frame. A shared base encoder extracts a feature
//! hierarchy; one residual encoder per emotion extracts another, and the
//! decoder consumes `e0(I) + sum_i a_i * e_i(I)` level by level through U-Net
//! style skip connections. Since frames depend only on `(I, a)`, a video is
//! produced by rendering any schedule of degree vectors, frame by frame.
//!
//! Modules:
//! - [`data`]: clips, degree labels, landmarks, mouth masks, synthetic faces
//! - [`model`]: encoders, decoder with landmark heatmap head, discriminators, checkpoints
//! - [`objectives`]: adversarial, reconstruction, landmark and temporal terms
//! - [`train`]: alternating optimization with deterministic resume
//! - [`synthesis`]: schedules, rendering, frame export
//! - [`evaluation`]: landmark-distance continuity curves and reports
//! - [`interface`]: command line and HTTP service

pub mod data;
mod error;
pub mod evaluation;
pub mod interface;
pub mod model;
pub mod objectives;
pub mod synthesis;
pub mod train;

pub use error::{Error, Result};
