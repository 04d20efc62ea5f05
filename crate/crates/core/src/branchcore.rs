//! Branch-aware square roots and the Laplace-space kernels.
//!
//! Every kernel is a function of `kappa = sqrt(w)` where `w = 1 - i p` for the
//! delta-bound problem and `w = -i p` for the free problem. The branch is fixed
//! by a cut ray in the `w` plane and normalized so that `kappa -> 1` as `w -> 1`
//! (that is `p -> 0` in the bound case and `p -> i` in the free case).
//!
//! Cut orientations, written as rays in the `p` plane leaving the branch point:
//!
//! * [`CutDirection::VerticalPrincipal`]: straight down (`w` on the negative real
//!   axis). This is the principal square root.
//! * [`CutDirection::HorizontalLeft`]: to the left along `Im p = const` (`w` on
//!   the positive imaginary axis). Used when the Bromwich contour is folded onto
//!   the left half plane.
//! * [`CutDirection::Tilted`]: a ray at an arbitrary angle into the left half
//!   plane; needed near a one-photon resonance where the Floquet pole sits on
//!   the horizontal cut.
//!
//! Side convention on a cut whose `p`-direction is `phi`: [`Side::Above`] is the
//! side reached by rotating the ray by `-pi/2`, [`Side::Below`] by `+pi/2`. For
//! the horizontal cut these are literally above and below. For the vertical cut
//! `Above` is the `Re p < 0` side (`Im w > 0`). Numerical continuation around
//! the branch point (see the tests) gives, for the horizontal cut,
//! `kappa_above = +sqrt(|w|) e^{i pi/4}` and `kappa_below = -kappa_above`.
//!
//! With a side other than [`Side::Principal`] the returned value is the branch
//! that is analytic across the cut and agrees with the principal value on the
//! selected side; it coincides with the one-sided limit on the cut itself.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{is_finite, Real};

/// Orientation of the cut leaving the branch point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutDirection {
    VerticalPrincipal,
    HorizontalLeft,
    /// Ray direction in the `p` plane, radians, strictly inside `(pi/2, 3pi/2)`.
    Tilted(f64),
}

impl CutDirection {
    /// Direction of the cut ray in the `p` plane.
    pub fn p_angle(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            CutDirection::VerticalPrincipal => 1.5 * PI,
            CutDirection::HorizontalLeft => PI,
            CutDirection::Tilted(phi) => phi,
        }
    }

    /// Angle of the cut ray in the `w = 1 - i p` plane.
    fn w_angle(self) -> f64 {
        self.p_angle() - std::f64::consts::FRAC_PI_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above,
    Below,
    Principal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSpec {
    pub cut: CutDirection,
    pub side: Side,
}

impl BranchSpec {
    pub const PRINCIPAL: BranchSpec = BranchSpec { cut: CutDirection::VerticalPrincipal, side: Side::Principal };
    pub const HORIZONTAL: BranchSpec = BranchSpec { cut: CutDirection::HorizontalLeft, side: Side::Principal };

    pub fn new(cut: CutDirection, side: Side) -> Self {
        BranchSpec { cut, side }
    }

    pub fn with_side(self, side: Side) -> Self {
        BranchSpec { side, ..self }
    }
}

impl Default for BranchSpec {
    fn default() -> Self {
        BranchSpec::HORIZONTAL
    }
}

/// Square root of `w` on the branch selected by `spec`.
pub fn branch_sqrt<T: Real>(w: Complex<T>, spec: BranchSpec) -> Result<Complex<T>> {
    if !is_finite(w) {
        return Err(Error::NonFinite("branch_sqrt"));
    }
    let zero = T::zero();
    if w.re == zero && w.im == zero {
        return Ok(Complex::new(zero, zero));
    }
    let two_pi = T::PI() + T::PI();
    let beta = T::lit(spec.cut.w_angle());
    let (lo, hi) = match spec.side {
        Side::Principal => {
            if on_cut(w, spec.cut) {
                return Err(Error::OnCut);
            }
            (beta - two_pi, beta)
        }
        Side::Above => (beta - T::PI(), beta + T::PI()),
        Side::Below => (beta - T::PI() - two_pi, beta - T::PI()),
    };
    let mut theta = w.im.atan2(w.re);
    while theta > hi {
        theta = theta - two_pi;
    }
    while theta <= lo {
        theta = theta + two_pi;
    }
    let half = T::lit(0.5);
    Ok(Complex::from_polar(w.norm().sqrt(), theta * half))
}

fn on_cut<T: Real>(w: Complex<T>, cut: CutDirection) -> bool {
    let zero = T::zero();
    match cut {
        CutDirection::VerticalPrincipal => w.im == zero && w.re < zero,
        CutDirection::HorizontalLeft => w.re == zero && w.im > zero,
        CutDirection::Tilted(_) => {
            let beta = T::lit(cut.w_angle());
            let (s, c) = beta.sin_cos();
            w.im * c - w.re * s == zero && w.re * c + w.im * s > zero
        }
    }
}

/// `sqrt(1 - i p)` on the requested branch.
pub fn sqrt_one_minus_ip<T: Real>(p: Complex<T>, spec: BranchSpec) -> Result<Complex<T>> {
    branch_sqrt(one_minus_ip(p), spec)
}

/// `sqrt(-i p)`, the free-particle analogue; `sqrt(i p) = i sqrt(-i p)`.
pub fn sqrt_minus_ip<T: Real>(p: Complex<T>, spec: BranchSpec) -> Result<Complex<T>> {
    branch_sqrt(Complex::new(p.im, -p.re), spec)
}

#[inline]
fn one_minus_ip<T: Real>(p: Complex<T>) -> Complex<T> {
    Complex::new(T::one() + p.im, -p.re)
}

/// `e^z - 1` without cancellation for small `|z|`.
pub(crate) fn cexpm1<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(0.5) {
        let mut term = z;
        let mut sum = z;
        for k in 2..40 {
            term = term * z / T::lit(k as f64);
            sum = sum + term;
            if term.norm() <= T::eps() * sum.norm() {
                break;
            }
        }
        sum
    } else {
        z.exp() - Complex::new(T::one(), T::zero())
    }
}

fn finite<T: Real>(z: Complex<T>, what: &'static str) -> Result<Complex<T>> {
    if is_finite(z) {
        Ok(z)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn pole_error<T: Real>(a: T) -> Error {
    let res = (T::lit(-2.0) * a).exp().to_f64().unwrap_or(f64::NAN);
    Error::KernelPole { residue: num_complex::Complex64::new(0.0, 2.0 * res) }
}

/// `k^-(p) = e^{-2a kappa} / (kappa - 1)` with `kappa = sqrt(1 - i p)`.
pub fn kernel_k_minus<T: Real>(p: Complex<T>, a: T, spec: BranchSpec) -> Result<Complex<T>> {
    let kappa = sqrt_one_minus_ip(p, spec)?;
    k_minus_from_kappa(p, kappa, a)
}

/// `k^+(p) = (1 + k^-(p)) / kappa`.
pub fn kernel_k_plus<T: Real>(p: Complex<T>, a: T, spec: BranchSpec) -> Result<Complex<T>> {
    let kappa = sqrt_one_minus_ip(p, spec)?;
    k_plus_from_kappa(p, kappa, a)
}

/// Both bound-state kernels `(k^+, k^-)` from one square root.
pub fn kernel_pair<T: Real>(p: Complex<T>, a: T, spec: BranchSpec) -> Result<(Complex<T>, Complex<T>)> {
    let kappa = sqrt_one_minus_ip(p, spec)?;
    Ok((k_plus_from_kappa(p, kappa, a)?, k_minus_from_kappa(p, kappa, a)?))
}

// kappa - 1 = -i p / (kappa + 1) keeps full relative precision near p = 0.
fn kappa_minus_one<T: Real>(p: Complex<T>, kappa: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let mip = Complex::new(p.im, -p.re);
    if kappa.re > T::zero() {
        mip / (kappa + one)
    } else {
        kappa - one
    }
}

fn k_minus_from_kappa<T: Real>(p: Complex<T>, kappa: Complex<T>, a: T) -> Result<Complex<T>> {
    if p.re == T::zero() && p.im == T::zero() {
        return Err(pole_error(a));
    }
    let two_a = a + a;
    let num = (-kappa * two_a).exp();
    finite(num / kappa_minus_one(p, kappa), "kernel_k_minus")
}

fn k_plus_from_kappa<T: Real>(p: Complex<T>, kappa: Complex<T>, a: T) -> Result<Complex<T>> {
    if p.re == T::zero() && p.im == T::zero() {
        return Err(pole_error(a));
    }
    let two_a = a + a;
    if kappa.re == T::zero() && kappa.im == T::zero() {
        // limit at the branch point p = -i
        return Ok(Complex::new(two_a - T::one(), T::zero()));
    }
    // 1 + k^- = (kappa - 1 + e^{-2a kappa}) / (kappa - 1), numerator via expm1
    let km1 = kappa_minus_one(p, kappa);
    let num = kappa + cexpm1(-kappa * two_a);
    finite(num / (kappa * km1), "kernel_k_plus")
}

/// Which of the two delta sites a free kernel is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteSign {
    Plus,
    Minus,
}

/// `i e^{i |x -+ a| sqrt(i p)} / sqrt(i p)` with `sqrt(i p) -> i` as `p -> i`.
///
/// With `sqrt(i p) = i kappa_f`, `kappa_f = sqrt(-i p)`, this is
/// `e^{-|x -+ a| kappa_f} / kappa_f`.
pub fn free_kernel<T: Real>(x: T, p: Complex<T>, a: T, sign: SiteSign, spec: BranchSpec) -> Result<Complex<T>> {
    let kf = sqrt_minus_ip(p, spec)?;
    if kf.re == T::zero() && kf.im == T::zero() {
        return Err(Error::BranchPoint("free kernel at p = 0".into()));
    }
    let d = match sign {
        SiteSign::Plus => (x - a).abs(),
        SiteSign::Minus => (x + a).abs(),
    };
    finite((-kf * d).exp() / kf, "free_kernel")
}

/// Free-particle kernel pair `(1/kappa_f, e^{-2a kappa_f}/kappa_f)`.
pub fn free_kernel_pair<T: Real>(p: Complex<T>, a: T, spec: BranchSpec) -> Result<(Complex<T>, Complex<T>)> {
    let kf = sqrt_minus_ip(p, spec)?;
    if kf.re == T::zero() && kf.im == T::zero() {
        return Err(Error::BranchPoint("free kernel at p = 0".into()));
    }
    let inv = kf.inv();
    let two_a = a + a;
    Ok((finite(inv, "free_kernel")?, finite((-kf * two_a).exp() * inv, "free_kernel")?))
}
