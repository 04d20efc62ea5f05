//! Survival of a delta-bound state under harmonic delta-function forcing.
//!
//! Three independent pipelines produce `theta(t)`: Floquet recurrences with
//! Laplace inversion ([`floquet`]), Volterra marching ([`timedomain`]) and a
//! Crank-Nicolson grid reference ([`oracle`]). The branch and kernel layer is
//! generic over the real scalar; everything downstream runs in `f64`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branchcore;
pub mod error;
pub mod fit;
pub mod floquet;
pub mod freeparticle;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod scalar;
pub mod timedomain;
pub mod trace;
pub mod validate;

pub use error::{Error, Result};
pub use model::{ModelConfig, Potential};
pub use trace::{Pipeline, SurvivalTrace};

pub use num_complex::Complex64;
pub type FloquetSystem64 = floquet::FloquetSystem<f64>;
pub type FloquetSolution64 = floquet::FloquetSolution<f64>;
pub type M2f64 = floquet::M2<f64>;
pub type V2f64 = floquet::V2<f64>;
