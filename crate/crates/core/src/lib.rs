pub mod click;
pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod network;
pub mod optim;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision network, as used for training and serving.
pub type RevisionNet32 = network::RevisionNet<f32>;
/// Double-precision network, for gradient checks and reference runs.
pub type RevisionNet64 = network::RevisionNet<f64>;
pub type RevisionInput32 = network::RevisionInput<f32>;
pub type RevisionInput64 = network::RevisionInput<f64>;
pub type ProbabilityMap32 = network::ProbabilityMap<f32>;
pub type ProbabilityMap64 = network::ProbabilityMap<f64>;
pub type ClickMap32 = click::ClickMap<f32>;
pub type ClickMap64 = click::ClickMap<f64>;
pub type ClickProbability64 = click::ClickProbability<f64>;
pub type DistanceField64 = geometry::DistanceField<f64>;
pub type PixelSpacing64 = geometry::PixelSpacing<f64>;
pub type Trainer32 = training::Trainer<f32>;
pub type Trainer64 = training::Trainer<f64>;
pub type Checkpoint32 = training::Checkpoint<f32>;
pub type Checkpoint64 = training::Checkpoint<f64>;
