//! Differentiable arithmetic, log-domain primitives and the Adam optimizer.

mod adam;
mod graph;
mod params;
mod scalar;
mod tensor;

pub use adam::{AdamConfig, AdamState, StepReport};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore, ParamTensor};
pub(crate) use scalar::check_floor;
pub use scalar::{
    floored_softplus, gaussian_diag_logpdf, ln_binomial, log_add_exp, log_one_minus_sigmoid, log_sigmoid, log_sum_exp,
    logit, sigmoid, softplus, softplus_inverse, LogReal, DEFAULT_VARIANCE_FLOOR, HALF_LN_2PI, LOG_ZERO,
};
pub use tensor::Tensor;
