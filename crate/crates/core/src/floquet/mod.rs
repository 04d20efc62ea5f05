//! Laplace-space Floquet machinery.

mod mat2;
pub mod system;

pub use mat2::{M2, V2};
pub use system::{build_system, pole_function, solve_inhomogeneous, BranchPlan, FloquetSolution, FloquetSystem};
pub mod pole;

pub use pole::{branch_local_p, resonant_frequency, find_pole, find_pole_with, find_poles_near_branch, kappa_on_physical_sheet, multiphoton_order, PoleOptions, PoleResult};
pub mod stabilize;

pub use stabilize::{check_inequalities, matching_defect, rho_recursion, stabilization_roots, stabilization_search, stabilizing_frequency, StabilizationPoint};
pub mod inversion;
pub use inversion::{invert_survival, invert_survival_with, survival_transform, Decomposition, InversionMethod, InversionOptions};
pub mod asymptotic;
pub use asymptotic::{fit_resonance_h, lambda_sigma, lambda_sigma_at_threshold, theta_asymptotic, theta_resonance, ResonanceParams};
