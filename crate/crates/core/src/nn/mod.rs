//! A small neural-network engine: dense, 1-D convolution, LSTM and GRU
//! layers, categorical cross-entropy, Adam, early stopping, k-fold splits and
//! finite-difference gradient checks. Everything runs in `f64` on one sample
//! at a time, which keeps training bit-reproducible.

mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod init;
mod kfold;
mod layer;
mod loss;
pub(crate) mod network;
pub mod recurrent;
mod tensor;
mod train;

pub use adam::Adam;
pub use gradcheck::{check_gradient, gradient_check};
pub use kfold::kfold_split;
pub use layer::{softmax, Layer, LayerSpec};
pub use loss::{cross_entropy, PROB_CLIP};
pub use network::{Network, NetworkSpec, Trace};
pub use tensor::{argmax, Shape, Tensor};
pub use train::{mean_loss, train, validation_split, EarlyStopping, TrainConfig, TrainHistory};
