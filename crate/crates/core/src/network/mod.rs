//! The click-conditioned revision network and its training losses.

mod config;
mod layers;
mod loss;
mod tensor;
mod unet;

pub use config::{Activation, NetworkConfig, Normalization};
pub use layers::{Conv2d, ConvBlock, InstanceNorm};
pub use loss::{
    balanced_total, boundary_distance_sq, dice_loss, hd_loss, hd_loss_with_transforms, training_loss, LossBreakdown,
    LossValue, BALANCE_GUARD, DICE_SMOOTH,
};
pub use tensor::Tensor;
pub use unet::{to_mask, ActivationShapes, ForwardTrace, Gradients, ProbabilityMap, RevisionInput, RevisionNet};
