//! Neighbor-driven feedforward predictor and its offline trainer.

mod format;
mod lm;
mod net;
mod normalize;
mod predictor;

pub use format::{load_net, load_predictors, save_net, save_predictors, FORMAT_VERSION, MAGIC};
pub use lm::{lm_refine, lm_train, LmConfig, StopReason, TrainingReport, TrainingSet};
pub use net::{Activation, Layer, NetTopologySpec, NeuralNet};
pub use normalize::{Affine, Normalization};
pub use predictor::{nn_error, NeighborPredictor, NeighborWindow};
