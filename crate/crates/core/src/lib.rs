//! End-to-end desk-scale driving-agent pipeline: self-distillation
//! pre-training of a vision encoder, a branched conditional imitation-learning
//! policy, iterative expert-corrected data aggregation in a procedural 2D
//! simulator, and a route/distance-completion benchmark.

pub mod arch;
pub mod checkpoint;
pub mod error;
pub mod dino;
pub mod image;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Dtype, Scalar, Tensor};
