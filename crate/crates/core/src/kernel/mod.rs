//! Dense tensor substrate: complex grids and 2-D FFTs, the neural ops the
//! model is built from, a reverse-mode tape over those ops, and the
//! finite-difference oracle used to check it.

pub mod fft;
pub mod gradcheck;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use fft::{fft2, ifft2, ComplexGrid, Fft1d, FourierPlan};
pub use gradcheck::{check_gradients, finite_diff_grad, relative_error, GradCheck};
pub use ops::{conv2d, depthwise_conv2d, elu, gelu, layer_norm, matmul, mean_rows, patchify, softmax_rows, LAYER_NORM_EPS};
pub use tape::{Grads, Tape, Var};
pub use tensor::{Scalar, Tensor, TensorGrid};
