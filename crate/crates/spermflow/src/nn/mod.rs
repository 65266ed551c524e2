//! Minimal tensor and reverse-mode autodiff engine sized for
//! ResNet-18/34-shaped regression networks.

pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod ops;
pub mod reference;
pub mod scalar;
pub mod tensor;
pub mod weights;

pub use model::{build_model, HeadKind, Mode, Model, ModelConfig, Variant};
pub use scalar::Scalar;
pub use tensor::Tensor;
