//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! Tensors record the operation that produced them; [`grad`] and
//! [`Tensor::backward`] walk that record in reverse. Backward rules are
//! built from the same recorded primitives, so passing `create_graph = true`
//! yields gradients that can be differentiated again (needed for gradient
//! penalties).
//!
//! ```
//! use ecg_tensor::{grad, Tensor};
//!
//! let x = Tensor::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
//! let y = x.square().sum();
//! let dx = grad(&y, &[x.clone()], false).unwrap();
//! assert_eq!(dx[0].to_vec(), vec![2.0, 4.0, 6.0]);
//! ```

mod autograd;
pub mod check;
mod error;
mod init;
mod layer;
pub mod nn;
mod ops;
mod optim;
mod params;
mod tensor;

pub use autograd::grad;
pub use error::{Result, TensorError};
pub use init::{he_uniform, LatentDistribution};
pub use layer::{LayerSpec, ParamSlot};
pub use ops::NO_INDEX;
pub use optim::{adam_step, AdamConfig, AdamState};
pub use params::{read_checkpoint, Param, ParamStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tensor::{is_grad_enabled, no_grad, set_grad_enabled, GradModeGuard, Tensor};
