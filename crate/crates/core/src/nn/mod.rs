//! Minimal differentiable building blocks: a fixed layer vocabulary,
//! sequential networks with verified gradients, and optimizers.

pub mod gradcheck;
pub mod layer;
pub mod network;
pub mod optim;

pub use gradcheck::{finite_difference_check, FdConfig, FdTarget, GradCheckReport};
pub use layer::{Layer, LayerSpec};
pub use network::{Network, Tape};
pub use optim::{LrSchedule, Optimizer, OptimizerKind};
