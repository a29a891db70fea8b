//! Minimal reverse-mode differentiable compute core: tensors, the layer and
//! loss primitives, AdamW, the exponential learning-rate schedule, and the
//! checkpoint container.

pub mod checkpoint;
pub mod ops;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use checkpoint::TensorArchive;
pub use ops::{NormMode, RunningStats};
pub use optim::{AdamW, AdamWConfig, LrSchedule};
pub use tape::{BatchStats, Gradients, Tape, Var};
pub use tensor::Tensor;
