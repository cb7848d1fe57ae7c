//! Dense tensors and reverse-mode differentiation for the primitives the
//! separation network uses.

pub mod kernels;
pub mod tape;
pub mod tensor;

pub use kernels::ConvGeometry;
pub use tape::{Tape, Var};
pub use tensor::{DType, Scalar, Tensor};

/// Stabilizer for every normalization.
pub const NORM_EPS: f64 = 1e-8;
