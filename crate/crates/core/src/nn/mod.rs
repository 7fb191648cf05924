//! Dense tensors, the three navigation networks, SGD training, an exact
//! fixed-point reference forward and the secret-shared forward pass.

pub mod checkpoint;
pub mod cipher;
pub mod fixed;
mod kernels;
pub mod model;
pub mod spec;
pub mod tensor;

use std::fmt::Debug;

use num_traits::{Float, NumAssign};
use thiserror::Error;

use crate::mpc::MpcError;
use crate::ring::RingError;

pub use model::{masked_mse, Grads, Param, Sequential};
pub use spec::LayerSpec;
pub use tensor::Tensor;

/// Floating-point element type of the plaintext stack.
pub trait Scalar: Float + NumAssign + Debug + Default + Send + Sync + 'static {
    /// `c = alpha * a * b + beta * c` on strided row-major views; `a` is
    /// `m x k`, `b` is `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: (&[Self], isize, isize), b: (&[Self], isize, isize), beta: Self, c: &mut [Self], ldc: usize);
}

macro_rules! scalar_gemm {
    ($t:ty, $f:ident) => {
        impl Scalar for $t {
            fn gemm(m: usize, k: usize, n: usize, alpha: $t, a: (&[$t], isize, isize), b: (&[$t], isize, isize), beta: $t, c: &mut [$t], ldc: usize) {
                if m == 0 || n == 0 {
                    return;
                }
                kernels::check_extent(a.0.len(), m, k, a.1, a.2);
                kernels::check_extent(b.0.len(), k, n, b.1, b.2);
                kernels::check_extent(c.len(), m, n, ldc as isize, 1);
                // SAFETY: the extent checks keep every strided access in bounds.
                unsafe {
                    matrixmultiply::$f(m, k, n, alpha, a.0.as_ptr(), a.1, a.2, b.0.as_ptr(), b.1, b.2, beta, c.as_mut_ptr(), ldc as isize, 1);
                }
            }
        }
    };
}

scalar_gemm!(f32, sgemm);
scalar_gemm!(f64, dgemm);

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("layer {0} is not supported here")]
    Unsupported(String),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
