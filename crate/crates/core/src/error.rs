use num_complex::Complex64;
use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("pole of the kernel at p = 0 (residue {residue})")]
    KernelPole { residue: Complex64 },

    #[error("evaluation at a branch point: {0}")]
    BranchPoint(String),

    #[error("argument lies on the branch cut; a side (above/below) must be selected")]
    OnCut,

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("Floquet system singular at index n = {n}: {what}")]
    Singular { n: i64, what: String },

    #[error("{what} did not converge (last residual {residual:.3e})")]
    NonConvergence { what: String, residual: f64 },

    #[error("quadrature failed in {what}: achieved {achieved:.3e}, requested {requested:.3e}")]
    Quadrature { what: String, achieved: f64, requested: f64 },

    #[error("no decaying solution: division by zero in rho recursion at n = {0}")]
    RhoBreakdown(usize),

    #[error("resonance regime: {0}")]
    Resonance(String),

    #[error("stability check failed: {0}")]
    Stability(String),

    #[error("step refinement failed: observed order {order:.2}, discrepancy {discrepancy:.3e}")]
    Refinement { order: f64, discrepancy: f64 },

    #[error("fit window [{lo}, {hi}] outside data range [{data_lo}, {data_hi}]")]
    FitWindow { lo: f64, hi: f64, data_lo: f64, data_hi: f64 },

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn no_conv(what: impl Into<String>, residual: f64) -> Self {
        Error::NonConvergence { what: what.into(), residual }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
