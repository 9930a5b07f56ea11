//! Network engine for the angle-of-arrival regressors: a fixed set of layer
//! kinds with hand-written gradients, a three-head sigmoid output, the joint
//! classification/regression loss, Adam, training and checkpoints.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod labels;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod predict;
pub mod train;

pub use error::{NnError, Result};
pub use labels::{decode_prediction, encode_label, Decoded, LabelTriple};
pub use layers::{LayerSpec, Mode};
pub use network::{ModelSpec, Network};
pub use optim::Adam;
pub use predict::{Prediction, Predictor};
pub use train::{train, TrainConfig, TrainStage};

use std::fmt::{Debug, Display};

/// Floating-point element type: `f32` for training, `f64` for gradient checks.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}
