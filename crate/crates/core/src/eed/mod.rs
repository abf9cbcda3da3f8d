//! Edge-enhancing diffusion: tensor construction, the discrete operator and
//! the inpainting solver.

mod smooth;
mod solver;
mod stencil;
mod tensor;

pub use smooth::gaussian_smooth;
pub use solver::{fill_unknown, inpaint, inpaint_guided, InpaintOutcome, SolverConfig};
pub use stencil::Stencil;
pub use tensor::{charbonnier, diffusion_tensor, tensor_from_smoothed, EedParams, TensorField, GRAD_EPS};
