//! Floquet pole location: decay rate and Stark shift.

use num_complex::Complex64 as C;

use super::system::{pole_function, BranchPlan};
use crate::branchcore::{BranchSpec, CutDirection, Side};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct PoleResult {
    pub xi0: C,
    pub gamma: f64,
    pub stark_shift: f64,
    pub order_n: u32,
    pub converged: bool,
    pub truncation_used: i64,
    pub diagnostic: Option<String>,
}

impl PoleResult {
    fn from_xi(xi0: C, omega: f64, truncation_used: i64) -> Self {
        PoleResult {
            xi0,
            gamma: -2.0 * xi0.re,
            stark_shift: xi0.im,
            order_n: multiphoton_order(omega).unwrap_or(0),
            converged: true,
            truncation_used,
            diagnostic: None,
        }
    }
}

/// Smallest `N` with `N omega > 1`.
pub fn multiphoton_order(omega: f64) -> Result<u32> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!("omega must be > 0, got {omega}")));
    }
    let k = (1.0 / omega).round();
    if k >= 1.0 && k * omega == 1.0 {
        return Err(Error::Resonance(format!("omega = 1/{k} exactly; use the resonance pathway")));
    }
    Ok((1.0 / omega).floor() as u32 + 1)
}

/// Local uniformizer at the branch point `b_m = -i (1 + omega m)` of index
/// `m`: `p = b_m + i kappa^2`. Every sheet of that kernel is reached by
/// continuous `kappa`, so roots next to the branch point are smooth here.
pub fn branch_local_p(omega: f64, m: i64, kappa: C) -> C {
    C::new(0.0, -1.0 - omega * m as f64) + C::new(0.0, 1.0) * kappa * kappa
}

/// Branch spec whose principal square root of `kappa^2` is `kappa`.
fn spec_returning(kappa: C) -> BranchSpec {
    // w-plane cut opposite to kappa^2: beta = 2 arg(kappa) + pi
    let beta = 2.0 * kappa.arg() + std::f64::consts::PI;
    BranchSpec::new(CutDirection::Tilted(beta + std::f64::consts::FRAC_PI_2), Side::Principal)
}

/// Whether the root at `kappa` lies on the sheet reached from the right half
/// plane when the cut of its index points along `cut`.
pub fn kappa_on_physical_sheet(kappa: C, cut: CutDirection) -> bool {
    let beta = cut.p_angle() - std::f64::consts::FRAC_PI_2;
    let arg = kappa.arg();
    let lo = 0.5 * (beta - 2.0 * std::f64::consts::PI);
    let hi = 0.5 * beta;
    // compare modulo 2 pi
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = arg;
    while a > hi {
        a -= two_pi;
    }
    while a <= lo {
        a += two_pi;
    }
    a <= hi && a > lo
}

/// Roots of the matching function in the uniformizing variable of index `m`
/// (secant from several seeds of modulus `scale`); duplicates merged.
pub fn find_poles_near_branch(config: &ModelConfig, m: i64, scale: f64, opts: PoleOptions) -> Result<Vec<C>> {
    config.validate()?;
    let ftol = (opts.tol * 1e-2).max(1e-15);
    let f = |k: C| {
        let p = branch_local_p(config.omega, m, k);
        let plan = opts.plan.with_index_spec(m, spec_returning(k));
        matching(config, p, plan, ftol).map(|v| v.0)
    };
    let mut roots: Vec<C> = Vec::new();
    for s in [0.3, 1.0, 3.0] {
        for q in 0..4 {
            let k0 = C::from_polar(s * scale, std::f64::consts::FRAC_PI_4 + q as f64 * std::f64::consts::FRAC_PI_2);
            if let Ok(k) = secant(&f, k0, k0 * C::new(1.01, 0.01), opts.tol, opts.max_iter) {
                if f(k).map(|v| v.norm() < 1e-6).unwrap_or(false) && !roots.iter().any(|r| (r - k).norm() < 1e-6 * k.norm().max(scale)) {
                    roots.push(k);
                }
            }
        }
    }
    Ok(roots)
}

/// Frequency of exact one-photon resonance: the part of the matching function
/// at the branch point `i (omega - 1)` that moves with `omega` vanishes there.
/// What is left is `O(r^4)` and fixes the shape parameter of the resonance
/// integral. Newton iteration on that projection, started at `1 + r^2 sigma`.
pub fn resonant_frequency(config: &ModelConfig, start: f64) -> Result<f64> {
    config.validate()?;
    if config.r == 0.0 {
        return Ok(1.0);
    }
    let at = |w: f64| -> Result<C> {
        let mut c = *config;
        c.omega = w;
        let plan = BranchPlan::default().with_index_spec(-1, spec_returning(C::new(1.0, 0.0)));
        matching(&c, C::new(0.0, w - 1.0), plan, 1e-15).map(|v| v.0)
    };
    let mut w = start;
    let step = 1e-3 * config.r * config.r;
    for _ in 0..50 {
        let f0 = at(w)?;
        let alpha = (at(w + step)? - f0) / step;
        let dw = (alpha.conj() * f0).re / alpha.norm_sqr();
        w -= dw;
        if dw.abs() < 1e-15 * w {
            return Ok(w);
        }
    }
    Err(Error::no_conv("resonant frequency", f64::NAN))
}

/// Branch points of the survival transform sit at `p = i (omega m - 1)`.
pub fn nearest_branch_point(p: C, omega: f64) -> C {
    let m = ((p.im + 1.0) / omega).round();
    C::new(0.0, omega * m - 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct PoleOptions {
    pub tol: f64,
    pub plan: BranchPlan,
    pub max_iter: usize,
}

impl Default for PoleOptions {
    fn default() -> Self {
        PoleOptions { tol: 1e-13, plan: BranchPlan::default(), max_iter: 200 }
    }
}

/// Matching function with its truncation converged: the half-window is doubled
/// from 16 until the value is stable to `tol` relative.
fn matching(config: &ModelConfig, p: C, plan: BranchPlan, tol: f64) -> Result<(C, i64)> {
    let mut w = 16;
    let mut prev = pole_function(config, p, w, plan)?;
    while w < 2048 {
        w *= 2;
        let next = pole_function(config, p, w, plan)?;
        if (next - prev).norm() <= tol * next.norm().max(f64::MIN_POSITIVE) {
            return Ok((next, w));
        }
        prev = next;
    }
    Err(Error::no_conv("pole function truncation", (prev).norm()))
}

/// Secant iteration from `x0`, `x1`.
fn secant(f: &dyn Fn(C) -> Result<C>, mut x0: C, mut x1: C, tol: f64, max_iter: usize) -> Result<C> {
    let mut f0 = f(x0)?;
    let mut f1 = f(x1)?;
    for _ in 0..max_iter {
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            return Err(Error::no_conv("secant: flat step", f1.norm()));
        }
        let step = f1 * (x1 - x0) / denom;
        let x2 = x1 - step;
        if !x2.re.is_finite() || !x2.im.is_finite() {
            return Err(Error::no_conv("secant: non-finite iterate", f1.norm()));
        }
        if step.norm() <= tol * x2.norm().max(1e-300) {
            return Ok(x2);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
    }
    Err(Error::no_conv("secant iteration", f1.norm()))
}

/// Zero count inside a rectangle by the argument principle.
fn winding(f: &dyn Fn(C) -> Result<C>, lo: C, hi: C) -> Result<i64> {
    let corners = [lo, C::new(hi.re, lo.im), hi, C::new(lo.re, hi.im), lo];
    let mut total = 0.0;
    for w in corners.windows(2) {
        let n = 64;
        let mut prev = f(w[0])?;
        for k in 1..=n {
            let z = w[0] + (w[1] - w[0]) * (k as f64 / n as f64);
            let val = f(z)?;
            let mut d = (val / prev).arg();
            // refine steps whose phase jump is large
            if d.abs() > 1.0 {
                let m = 32;
                d = 0.0;
                let mut q = prev;
                let z0 = w[0] + (w[1] - w[0]) * ((k - 1) as f64 / n as f64);
                for j in 1..=m {
                    let zz = z0 + (z - z0) * (j as f64 / m as f64);
                    let v = f(zz)?;
                    d += (v / q).arg();
                    q = v;
                }
            }
            total += d;
            prev = val;
        }
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

fn bisect_zero(f: &dyn Fn(C) -> Result<C>, mut lo: C, mut hi: C, depth: usize) -> Result<Option<C>> {
    if winding(f, lo, hi)? < 1 {
        return Ok(None);
    }
    for _ in 0..depth {
        let mid = (lo + hi) * 0.5;
        let quads = [
            (lo, mid),
            (C::new(mid.re, lo.im), C::new(hi.re, mid.im)),
            (C::new(lo.re, mid.im), C::new(mid.re, hi.im)),
            (mid, hi),
        ];
        let mut found = false;
        for (a, b) in quads {
            if winding(f, a, b).unwrap_or(0) >= 1 {
                lo = a;
                hi = b;
                found = true;
                break;
            }
        }
        if !found {
            break;
        }
    }
    Ok(Some((lo + hi) * 0.5))
}

/// Locate the Floquet pole `xi0` closest to `guess`.
///
/// Secant on the full-recurrence matching function; when it fails, a winding
/// number search over `[-K r^2, 0] x [-K r^2, K r^2]` (K = 1, 4, 16) brackets
/// the zero and the secant polishes it.
pub fn find_pole(config: &ModelConfig, guess: C) -> Result<PoleResult> {
    find_pole_with(config, guess, PoleOptions::default())
}

pub fn find_pole_with(config: &ModelConfig, guess: C, opts: PoleOptions) -> Result<PoleResult> {
    config.validate()?;
    let r = config.r;
    if r == 0.0 {
        return Ok(PoleResult::from_xi(C::new(0.0, 0.0), config.omega, 0));
    }
    let plan = opts.plan;
    let ftol = (opts.tol * 1e-2).max(1e-15);
    let scale_nudge = (r * r).max(1e-12) * 1e-9;
    // the matching function is regular at p = 0 but the kernels are not
    let f = |p: C| {
        let p = if p.norm() == 0.0 { C::new(-scale_nudge, scale_nudge) } else { p };
        matching(config, p, plan, ftol).map(|v| v.0)
    };
    let scale = (r * r).max(1e-12);
    let x0 = if guess.norm() > 0.0 { guess } else { C::new(-1e-3, 2e-3) * scale };
    let x1 = x0 + C::new(-0.5e-2, 1e-2) * scale.max(x0.norm());
    let xi = match secant(&f, x0, x1, opts.tol, opts.max_iter) {
        Ok(x) => x,
        Err(first) => {
            let mut found = None;
            for k in [1.0, 4.0, 16.0] {
                let s = k * scale;
                if let Some(z) = bisect_zero(&f, C::new(-s, -0.97 * s), C::new(0.05 * s, s), 12)? {
                    found = Some(secant(&f, z, z + C::new(s * 1e-4, 0.0), opts.tol, opts.max_iter)?);
                    break;
                }
            }
            found.ok_or(first)?
        }
    };
    let (_, w) = matching(config, xi, plan, ftol)?;
    let mut res = PoleResult::from_xi(xi, config.omega, w);
    if xi.re > opts.tol.max(1e-10) * scale.max(1.0) {
        res.converged = false;
        res.diagnostic = Some(format!("root {xi} lies in the right half plane"));
    }
    let bp = nearest_branch_point(xi, config.omega);
    let dist = (xi - bp).norm();
    if dist < 5.0 * r * r * config.omega {
        res.converged = false;
        res.diagnostic = Some(format!("pole {xi} is {dist:.3e} from branch point {bp}: resonance regime"));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branchcore::{kernel_k_plus, BranchSpec};

    #[test]
    fn multiphoton_orders() {
        assert_eq!(multiphoton_order(1.5).unwrap(), 1);
        assert_eq!(multiphoton_order(0.55).unwrap(), 2);
        assert_eq!(multiphoton_order(0.35).unwrap(), 3);
        assert!(matches!(multiphoton_order(0.5), Err(Error::Resonance(_))));
        assert!(multiphoton_order(1.0 / 3.0).is_err());
        assert!(multiphoton_order(0.0).is_err());
    }

    #[test]
    fn unperturbed_pole_is_origin() {
        let p = find_pole(&ModelConfig::u1(0.59, 0.0, 1.5).unwrap(), C::new(0.0, 0.0)).unwrap();
        assert_eq!(p.xi0, C::new(0.0, 0.0));
        assert_eq!(p.gamma, 0.0);
    }

    /// Root of the three-term pole equation
    /// `1 - (r^2/4) k+_0 (k+_1 + k+_{-1}) = 0`.
    fn three_term_pole(a: f64, r: f64, omega: f64) -> C {
        let s = BranchSpec::HORIZONTAL;
        let k = |p: C| kernel_k_plus(p, a, s).unwrap();
        let f = |p: C| Ok(1.0 - r * r / 4.0 * k(p) * (k(p + C::new(0.0, omega)) + k(p - C::new(0.0, omega))));
        let x0 = C::new(-1e-3, 1e-3) * r * r;
        secant(&f, x0, x0 * 1.1, 1e-14, 200).unwrap()
    }

    #[test]
    fn small_r_agrees_with_three_term_equation() {
        let (a, omega) = (0.59, 1.5);
        let mut prev = f64::NAN;
        for r in [0.1, 0.05] {
            let cfg = ModelConfig::u1(a, r, omega).unwrap();
            let p = find_pole(&cfg, C::new(0.0, 0.0)).unwrap();
            assert!(p.converged, "{:?}", p.diagnostic);
            assert!(p.gamma > 0.0);
            let d = (p.xi0 - three_term_pole(a, r, omega)).norm();
            assert!(d < 0.05 * p.xi0.norm(), "{d} vs {}", p.xi0);
            if prev.is_finite() {
                let order = (prev / d).log2();
                assert!(order > 3.6, "order {order}");
            }
            prev = d;
        }
    }

    #[test]
    fn u2_pole_is_parity_invariant() {
        let cfg = ModelConfig::u2(0.8, 0.2, 1.4).unwrap();
        let p = find_pole(&cfg, C::new(0.0, 0.0)).unwrap();
        let q = find_pole(&cfg.with_r(-0.2), C::new(0.0, 0.0)).unwrap();
        assert!((p.xi0 - q.xi0).norm() < 1e-12 * p.xi0.norm().max(1e-3));
        assert!(p.gamma > 0.0);
    }

    #[test]
    fn winding_fallback_finds_pole() {
        let cfg = ModelConfig::u1(0.59, 0.2, 1.5).unwrap();
        let f = |p: C| matching(&cfg, p, BranchPlan::default(), 1e-15).map(|v| v.0);
        let z = bisect_zero(&f, C::new(-0.04, -0.039), C::new(0.002, 0.04), 10).unwrap().unwrap();
        let p = find_pole(&cfg, C::new(0.0, 0.0)).unwrap();
        assert!((z - p.xi0).norm() < 1e-3, "{z} {}", p.xi0);
    }

    #[test]
    fn uniformizer_reaches_both_sheets() {
        let k = C::new(0.3, 0.2);
        let p = branch_local_p(1.2, -1, k);
        let spec = spec_returning(k);
        let got = crate::branchcore::sqrt_one_minus_ip(p - C::new(0.0, 1.2), spec).unwrap();
        assert!((got - k).norm() < 1e-14);
        let got = crate::branchcore::sqrt_one_minus_ip(p - C::new(0.0, 1.2), spec_returning(-k)).unwrap();
        assert!((got + k).norm() < 1e-14);
        assert!(kappa_on_physical_sheet(C::new(1.0, 0.1), CutDirection::HorizontalLeft));
        assert!(!kappa_on_physical_sheet(C::new(-1.0, -0.1), CutDirection::HorizontalLeft));
    }

    #[test]
    fn branch_local_search_recovers_regular_pole() {
        let cfg = ModelConfig::u1(0.59, 0.3, 1.02).unwrap();
        let m = -1;
        let ks = find_poles_near_branch(&cfg, m, 0.1, PoleOptions::default()).unwrap();
        assert!(!ks.is_empty());
        let ps: Vec<C> = ks.iter().map(|&k| branch_local_p(cfg.omega, m, k)).collect();
        // every root is a zero of the matching function on its own sheet
        for (&k, p) in ks.iter().zip(&ps) {
            let plan = BranchPlan::default().with_index_spec(m, spec_returning(k));
            assert!(matching(&cfg, *p, plan, 1e-15).unwrap().0.norm() < 1e-9);
        }
    }

    #[test]
    fn resonant_frequency_sits_at_the_stark_shifted_threshold() {
        let cfg = ModelConfig::u1(0.59, 0.05, 1.0).unwrap();
        let w = resonant_frequency(&cfg, 1.0 + 0.05f64.powi(2) * 0.186).unwrap();
        // Delta = r^2 sigma(1) + O(r^4)
        assert!((w - 1.0 - 0.0025 * 0.1857).abs() < 2e-5, "{w}");
        // no pole of the physical sheet survives there
        let mut c = cfg;
        c.omega = w;
        let ks = find_poles_near_branch(&c, -1, 0.1 * 0.0025, PoleOptions::default()).unwrap();
        assert!(ks.iter().all(|&k| !kappa_on_physical_sheet(k, CutDirection::HorizontalLeft)));
    }

    #[test]
    fn resonance_is_flagged() {
        // omega just above 1 puts the pole next to the branch point i(omega - 1)
        let cfg = ModelConfig::u1(0.59, 0.3, 1.0 + 0.02).unwrap();
        if let Ok(p) = find_pole(&cfg, C::new(0.0, 0.0)) { assert!(!p.converged) }
    }
}
