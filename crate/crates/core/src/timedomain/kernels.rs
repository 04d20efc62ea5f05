//! Convolution kernels in the time domain and their product-integration
//! weights.
//!
//! With `kappa = sqrt(1 - i p) = beta sqrt(p + i)`, `beta = e^{-i pi/4}`, the
//! inverse transforms of `k^+-` follow from
//! `L^{-1}[e^{-c s} / (s + d)] = (pi t)^{-1/2} e^{-c^2/4t} - d e^{-c^2/4t} erfcx(z)`
//! with `s = sqrt(p)`, `c = 2 a beta`, `d = -1/beta` and
//! `z = c / 2 sqrt(t) + d sqrt(t)`:
//!
//! ```text
//! K+(t) = e^{-it} [ (pi t)^{-1/2} / beta + e^{i a^2/t} erfcx(z) / beta^2 ]
//! K-(t) = e^{-it} e^{i a^2/t} [ (pi t)^{-1/2} - d erfcx(z) ] / beta
//! ```
//!
//! The free kernels `1/kappa_f` and `e^{-2a kappa_f}/kappa_f` invert to
//! `(pi t)^{-1/2} / beta` and the same times `e^{i a^2/t}`.
//!
//! `e^{i a^2/t}` oscillates without bound as `t -> 0`. It decays once `t`
//! turns into the lower half plane, and every kernel is analytic in
//! `-pi/4 <= arg t <= 0`, so the first panels are integrated along a path
//! through that sector.

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, integrate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `K+`, the bound-state kernel between a site and itself.
    Plus,
    /// `K-`, between sites `2a` apart.
    Minus,
    /// Free kernel, same site.
    FreeSame,
    /// Free kernel, sites `2a` apart.
    FreeCross,
}

impl KernelKind {
    /// Bound kernels carry `e^{-it}` from the shift `p -> p + i`.
    fn rotates(self) -> bool {
        matches!(self, KernelKind::Plus | KernelKind::Minus)
    }

    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Plus => "plus",
            KernelKind::Minus => "minus",
            KernelKind::FreeSame => "free_same",
            KernelKind::FreeCross => "free_cross",
        }
    }

    /// Leading `t -> 0` term `coefficient e^{i oscillation / t} t^{-1/2}`.
    pub fn singular_part(self, a: f64) -> SingularPart {
        let coefficient = C::from_polar(1.0 / std::f64::consts::PI.sqrt(), std::f64::consts::FRAC_PI_4);
        let oscillation = match self {
            KernelKind::Plus | KernelKind::FreeSame => 0.0,
            KernelKind::Minus | KernelKind::FreeCross => a * a,
        };
        SingularPart { exponent: -0.5, coefficient, oscillation }
    }
}

const INV_BETA: C = C { re: std::f64::consts::FRAC_1_SQRT_2, im: std::f64::consts::FRAC_1_SQRT_2 };

/// `K(t)` for `t` in the sector `-pi/4 <= arg t <= 0`, `t != 0`.
pub fn kernel(a: f64, kind: KernelKind, t: C) -> C {
    let st = t.sqrt();
    let lead = (std::f64::consts::PI * t).sqrt().inv();
    // e^{-c^2/4t} with c^2 = -4 i a^2
    let osc = (C::new(0.0, a * a) / t).exp();
    match kind {
        KernelKind::FreeSame => lead * INV_BETA,
        KernelKind::FreeCross => lead * INV_BETA * osc,
        KernelKind::Plus | KernelKind::Minus => {
            let c = INV_BETA.conj() * (2.0 * a);
            let d = -INV_BETA;
            let ex = (c / (st * 2.0) + d * st).erfcx();
            let rot = (C::new(0.0, -1.0) * t).exp();
            if kind == KernelKind::Plus {
                rot * (lead * INV_BETA + osc * ex * INV_BETA * INV_BETA)
            } else {
                rot * osc * (lead - d * ex) * INV_BETA
            }
        }
    }
}

/// `K(t)` on the real axis.
pub fn kernel_at(a: f64, kind: KernelKind, t: f64) -> C {
    kernel(a, kind, C::new(t, 0.0))
}

/// Moments `int_0^tau K(s) s^k ds` (k = 0, 1) along
/// `s = u^2`, `u = sqrt(tau) v (1 - i g (1 - v))`, `g = tan(pi/8)`, so the path
/// leaves the origin at `arg s = -pi/4`.
fn moments_from_origin(k: &(dyn Fn(C) -> C + Sync), tau: f64) -> Result<(C, C)> {
    let g = (std::f64::consts::PI / 8.0).tan();
    let rt = tau.sqrt();
    let path = |v: f64| -> (C, C) {
        let u = C::new(v, -g * v * (1.0 - v)) * rt;
        let du = C::new(1.0, -g * (1.0 - 2.0 * v)) * rt;
        (u, du)
    };
    let mut out = [C::new(0.0, 0.0); 2];
    for (pow, slot) in out.iter_mut().enumerate() {
        let mut f = |v: f64| -> Result<C> {
            if v == 0.0 {
                return Ok(C::new(0.0, 0.0));
            }
            let (u, du) = path(v);
            let s = u * u;
            Ok(k(s) * s.powi(pow as i32) * u * du * 2.0)
        };
        let scale = tau.powf(0.5 + pow as f64);
        *slot = integrate(&mut f, 0.0, 1.0, 1e-15 * scale, 1e-13, 4000)?.value;
    }
    Ok((out[0], out[1]))
}

/// Product-integration weights of one kernel on the grid `t_j = j h`.
///
/// For data linear on each panel,
/// `int_0^{t_n} K(t_n - s) phi(s) ds = endpoint[n] phi_0 + sum_{j=1}^{n} interior[n - j] phi_j`.
#[derive(Debug, Clone)]
pub struct ConvolutionWeights {
    pub h: f64,
    pub interior: Vec<C>,
    pub endpoint: Vec<C>,
}

/// Panel integrals `A_m = int K` and `B_m = int K (m h - s)/h` over
/// `[(m-1) h, m h]`, `m = 1..=n`, then the weights.
///
/// `osc` is the coefficient of the `e^{i osc/t}` factor; panels with
/// `(m - 1) h < 2 sqrt(osc h)` use the deformed path.
pub fn convolution_weights(k: &(dyn Fn(C) -> C + Sync), h: f64, n: usize, osc: f64) -> Result<ConvolutionWeights> {
    if !(h > 0.0) || n == 0 {
        return Err(Error::domain("weights need h > 0 and n >= 1"));
    }
    let m_path = ((2.0 * (osc.max(0.0) * h).sqrt() / h).ceil() as usize + 1).max(2).min(n + 1);
    // J_k(m h) for m = 0..m_path
    let js: Vec<(C, C)> = (0..=m_path)
        .into_par_iter()
        .map(|m| if m == 0 { Ok((C::new(0.0, 0.0), C::new(0.0, 0.0))) } else { moments_from_origin(k, m as f64 * h) })
        .collect::<Result<_>>()?;
    let (gx, gw) = gauss_legendre(16);
    let ab: Vec<(C, C)> = (1..=n)
        .into_par_iter()
        .map(|m| {
            let mf = m as f64;
            if m <= m_path {
                let a = js[m].0 - js[m - 1].0;
                let b = a * mf - (js[m].1 - js[m - 1].1) / h;
                (a, b)
            } else {
                let (lo, hi) = ((mf - 1.0) * h, mf * h);
                let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let mut a = C::new(0.0, 0.0);
                let mut b = C::new(0.0, 0.0);
                for (x, w) in gx.iter().zip(&gw) {
                    let s = mid + half * x;
                    let kv = k(C::new(s, 0.0)) * (half * w);
                    a += kv;
                    b += kv * ((hi - s) / h);
                }
                (a, b)
            }
        })
        .collect();
    let mut interior = vec![C::new(0.0, 0.0); n + 1];
    let mut endpoint = vec![C::new(0.0, 0.0); n + 1];
    interior[0] = ab[0].1;
    for m in 1..=n {
        let (a, b) = ab[m - 1];
        endpoint[m] = a - b;
        if m < n {
            interior[m] = a - b + ab[m].1;
        }
    }
    if interior.iter().chain(&endpoint).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("convolution weights"));
    }
    Ok(ConvolutionWeights { h, interior, endpoint })
}

/// Weights of a model kernel.
pub fn kernel_weights(a: f64, kind: KernelKind, h: f64, n: usize) -> Result<ConvolutionWeights> {
    convolution_weights(&|t| kernel(a, kind, t), h, n, a * a)
}

/// `t -> 0` part of a kernel split off in closed form:
/// `coefficient t^exponent e^{i oscillation / t}`, carried by `e^{-it}` for
/// the bound kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPart {
    pub exponent: f64,
    pub coefficient: C,
    pub oscillation: f64,
}

/// Samples of `K(t)` minus its singular part on a grid that is geometric
/// near zero and uniform beyond.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub a: f64,
    pub kind: KernelKind,
    pub t_grid: Vec<f64>,
    pub values: Vec<C>,
    pub singular_part: SingularPart,
}

/// Tabulate `kind` on `[0, t_max]` with about `n_samples` points, half of
/// them geometric on `[t_max 1e-9, t_max / 50]`, and check the table by
/// forward transformation against the Laplace-domain kernel.
pub fn build_kernel_table(a: f64, kind: KernelKind, t_max: f64, n_samples: usize) -> Result<KernelTable> {
    if !(t_max > 0.0) || n_samples < 16 {
        return Err(Error::domain("kernel table needs t_max > 0 and at least 16 samples"));
    }
    let half = n_samples / 2;
    let (g0, g1) = (t_max * 1e-9, t_max / 50.0);
    let ratio = (g1 / g0).powf(1.0 / half as f64);
    let mut t_grid = vec![0.0];
    t_grid.extend((0..half).map(|i| g0 * ratio.powi(i as i32)));
    let rest = n_samples - half;
    t_grid.extend((0..=rest).map(|i| g1 + (t_max - g1) * i as f64 / rest as f64));
    let sing = kind.singular_part(a);
    let rot = kind.rotates();
    let values = t_grid
        .par_iter()
        .map(|&t| if t == 0.0 { regular_at_zero(a, kind) } else { kernel_at(a, kind, t) - sing_value(sing, rot, t) })
        .collect();
    let table = KernelTable { a, kind, t_grid, values, singular_part: sing };
    Ok(table)
}

fn sing_value(s: SingularPart, rotates: bool, t: f64) -> C {
    let phase = if rotates { -t } else { 0.0 } + s.oscillation / t;
    s.coefficient * C::new(0.0, phase).exp() * t.powf(s.exponent)
}

fn regular_at_zero(a: f64, kind: KernelKind) -> C {
    match kind {
        // the erfcx term tends to erfcx(0) / beta^2 when a = 0 and to zero otherwise
        KernelKind::Plus | KernelKind::Minus if a == 0.0 => INV_BETA * INV_BETA,
        _ => C::new(0.0, 0.0),
    }
}

impl KernelTable {
    /// Forward transform `int_0^{t_max} e^{-pt} K(t) dt`: exact for the
    /// singular part (its tail beyond `t_max` included), and for the table
    /// remainder exact against `e^{-pt}` with the remainder (less its `e^{-it}`
    /// rotation) linear between samples.
    pub fn laplace(&self, p: C) -> C {
        let s = self.singular_part;
        let rot = self.kind.rotates();
        // int_0^inf e^{-q t} e^{i w / t} t^{-1/2} dt = sqrt(pi / q) e^{-2 sqrt(-i w q)}
        let q = if rot { p + C::new(0.0, 1.0) } else { p };
        let sing = s.coefficient * (C::new(std::f64::consts::PI, 0.0) / q).sqrt() * (-2.0 * (C::new(0.0, -s.oscillation) * q).sqrt()).exp();
        let f: Vec<C> = self
            .t_grid
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| if rot { v * C::new(0.0, t).exp() } else { v })
            .collect();
        let mut reg = C::new(0.0, 0.0);
        for i in 1..f.len() {
            let (t0, dt) = (self.t_grid[i - 1], self.t_grid[i] - self.t_grid[i - 1]);
            let (i0, i1) = linear_moments(q, dt);
            reg += (-q * t0).exp() * (f[i - 1] * i0 + (f[i] - f[i - 1]) * i1);
        }
        sing + reg
    }

    /// Largest relative mismatch of [`laplace`](Self::laplace) against
    /// `k(p)` over `points`: `(max, worst point)`.
    pub fn round_trip(&self, points: &[C], k: impl Fn(C) -> Result<C>) -> Result<(f64, C)> {
        let mut worst = (0.0, C::new(0.0, 0.0));
        for &p in points {
            let exact = k(p)?;
            let d = (self.laplace(p) - exact).norm() / exact.norm();
            if d > worst.0 {
                worst = (d, p);
            }
        }
        Ok(worst)
    }
}

/// `(int_0^d e^{-q s} ds, int_0^d (s/d) e^{-q s} ds)`, by series when `q d` is small.
fn linear_moments(q: C, d: f64) -> (C, C) {
    let x = q * d;
    if x.norm() < 1e-2 {
        let i0 = d * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0);
        let i1 = d * (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0);
        (i0, i1)
    } else {
        let e = (-x).exp();
        ((1.0 - e) / q, (1.0 - (1.0 + x) * e) / (q * x))
    }
}
