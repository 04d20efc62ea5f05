//! Direct time-domain pipeline: the coupled Volterra equations for the
//! amplitudes at the drive sites, marched with product integration.

pub mod kernels;

pub use kernels::{build_kernel_table, convolution_weights, kernel, kernel_at, kernel_weights, ConvolutionWeights, KernelKind, KernelTable, SingularPart};
pub mod volterra;

pub use volterra::{cumulative_integral, march, solve_volterra, step_halving, survival_from_y, volterra_survival, Refinement, VolterraState};
