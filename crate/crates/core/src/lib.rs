//! Malicious sensor-node discovery for star-topology wireless sensor
//! networks. The base station predicts every node's reading twice, from the
//! node's own history (recursive AR) and from its spatial neighbors (a
//! feedforward net), counts threshold breaches per channel, and starts a
//! self-destruction procedure when a rule table says both channels agree.
//!
//! Numerical building blocks are generic over [`Scalar`] (`f32` or `f64`);
//! the simulator runs in `f64`.

// `!(x > 0)` is how NaN gets rejected; index loops mirror the algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ar;
pub mod decision;
pub mod destruct;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod node;
pub mod report;
pub mod scalar;
pub mod sim;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub type NodeId = u32;

pub type ArEstimatorF32 = ar::ArEstimator<f32>;
pub type ArEstimatorF64 = ar::ArEstimator<f64>;
pub type NeuralNetF32 = nn::NeuralNet<f32>;
pub type NeuralNetF64 = nn::NeuralNet<f64>;
pub type TrainingSetF64 = nn::TrainingSet<f64>;
pub type NeighborPredictorF64 = nn::NeighborPredictor<f64>;
