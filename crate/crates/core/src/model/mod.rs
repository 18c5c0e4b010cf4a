//! Generator (base encoder, residual encoders, decoder with landmark head) and
//! the global/local discriminators.

pub mod checkpoint;
mod config;
mod discriminator;
mod features;
mod generator;
mod layers;
mod params;

pub use checkpoint::{load_params, load_params_into, read_checkpoint, save_params, Checkpoint};
pub use config::ModelConfig;
pub use discriminator::{Discriminators, Which};
pub use features::{aggregate_features, aggregate_sparse, ActionVector, FeatureHierarchy};
pub use generator::{heatmap_landmarks, GeneratedFrame, Generator, GeneratorOutput};
pub use params::ParamStore;
