//! Non-decay manifold: parameters where the homogeneous recurrence has a
//! square-summable solution on the imaginary axis.
//!
//! With `z_n = 0` for `n <= 0` and a degenerate `n = 0` block, the recurrence
//! for `n >= 1` reduces to the scalar form `rho_n = 2/(r k_n) - 1/rho_{n-1}`,
//! `rho_1 = 2/(r k_1)`, where `rho_n = i z_{n+1} / z_n`. A decaying solution
//! exists when this forward sequence coincides with the minimal one, which is
//! the backward continued fraction
//! `rho_1 = 1/(2/(r k_2) - 1/(2/(r k_3) - ...))`. The matching defect is
//! `F = 2/(r k_1) - rho_1^min`.
//!
//! The degeneracy of the `n = 0` block fixes `g0`:
//! * `U2`: `det M_0 = (k+_0)^2 - (k-_0)^2 = 0` gives `a sqrt(-1 - g0) = pi N`.
//!   The free-particle statement of the same condition is printed as
//!   `(k+_0)^2 - (k+_0)^2`, read here as `(k+_0)^2 - (k-_0)^2`; the literal
//!   reading vanishes identically and fixes nothing.
//! * free pair: the same condition with free kernels, `g0 = -(pi N / a)^2`.
//! * `U1`: the scalar block is `k+_0` itself, so `k+(i g0) = 0`, i.e.
//!   `e^{-2 a kappa} = 1 - kappa` with `kappa = sqrt(1 + g0)` in `(0, 1)`. This
//!   has a root only for `a > 1/2` and exactly one root, so only `N = 1`.

use crate::branchcore::{kernel_pair, BranchSpec};
use crate::error::{Error, Result};
use crate::model::Potential;
use num_complex::Complex64 as C;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationPoint {
    pub a: f64,
    pub omega: f64,
    pub r_s: f64,
    pub g0: f64,
    pub n: u32,
    /// `|F| / (2 / (r k_1))` at the root.
    pub residual: f64,
    /// Whether the two solvability inequalities hold at `g0` (diagnostic only).
    pub inequalities: bool,
}

/// Default continued-fraction depth; `k_n ~ (omega n)^{-1/2}` makes the tail
/// converge superexponentially, so this is generous.
pub const CF_DEPTH: usize = 120;

/// `g0` for the non-decay ansatz, or `None` when it leaves the admissible interval.
pub fn stabilization_g0(potential: Potential, omega: f64, n: u32) -> Result<Option<f64>> {
    let a = potential.a();
    if !(a > 0.0 && a.is_finite()) || !(omega > 0.0) || n == 0 {
        return Err(Error::domain(format!("need a > 0, omega > 0, N >= 1 (a = {a}, omega = {omega}, N = {n})")));
    }
    let pn = std::f64::consts::PI * n as f64 / a;
    Ok(match potential {
        Potential::U2 { .. } => {
            let g0 = -1.0 - pn * pn;
            (g0 > -omega && g0 < -1.0).then_some(g0)
        }
        Potential::FreeTrap { .. } => {
            let g0 = -pn * pn;
            (g0 > -omega && g0 < 0.0).then_some(g0)
        }
        Potential::U1 { .. } => {
            if n != 1 || a <= 0.5 {
                None
            } else {
                u1_g0(a)
            }
        }
    })
}

/// Root of `e^{-2 a kappa} = 1 - kappa` in `(0, 1)`, returned as `g0 = kappa^2 - 1`.
fn u1_g0(a: f64) -> Option<f64> {
    let h = |k: f64| (-2.0 * a * k).exp() - 1.0 + k;
    // h(0) = 0, h'(0) = 1 - 2a < 0, h(1) = e^{-2a} > 0
    let (mut lo, mut hi) = (1e-12, 1.0);
    if h(lo) >= 0.0 {
        // a barely above 1/2: the root hugs 0
        lo = 1e-300;
        if h(lo) >= 0.0 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k = 0.5 * (lo + hi);
    (k > 0.0 && k < 1.0).then_some(k * k - 1.0)
}

/// Coefficient `k_n` of the scalar recurrence at `p = i (g0 + omega n)`.
pub fn k_coefficient(potential: Potential, g0: f64, omega: f64, n: usize) -> Result<f64> {
    let a = potential.a();
    let e = g0 + omega * n as f64;
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let val = match potential {
        Potential::FreeTrap { .. } => {
            if e <= 0.0 {
                return Err(Error::domain(format!("g0 + omega n = {e} <= 0")));
            }
            let s = e.sqrt();
            (1.0 + sign * (-2.0 * a * s).exp()) / s
        }
        Potential::U1 { .. } | Potential::U2 { .. } => {
            let p = C::new(0.0, e);
            let (kp, km) = kernel_pair(p, a, BranchSpec::HORIZONTAL)?;
            match potential {
                Potential::U1 { .. } => kp.re,
                _ => kp.re + sign * km.re,
            }
        }
    };
    if !val.is_finite() {
        return Err(Error::NonFinite("k_coefficient"));
    }
    Ok(val)
}

fn coefficients(potential: Potential, g0: f64, omega: f64, depth: usize) -> Result<Vec<f64>> {
    // index 0 unused so that ks[n] = k_n
    let mut ks = vec![f64::NAN];
    for n in 1..=depth {
        ks.push(k_coefficient(potential, g0, omega, n)?);
    }
    Ok(ks)
}

/// Forward sequence `rho_1 .. rho_{n_max}`.
pub fn rho_recursion(potential: Potential, g0: f64, omega: f64, r: f64, n_max: usize) -> Result<Vec<f64>> {
    let ks = coefficients(potential, g0, omega, n_max)?;
    let mut rho = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let base = 2.0 / (r * ks[n]);
        let v = if n == 1 {
            base
        } else {
            let prev = rho[n - 2];
            if prev == 0.0 {
                return Err(Error::RhoBreakdown(n));
            }
            base - 1.0 / prev
        };
        rho.push(v);
    }
    Ok(rho)
}

/// Minimal (decaying) sequence from the backward continued fraction, `rho_1 ..`.
pub fn rho_minimal(potential: Potential, g0: f64, omega: f64, r: f64, n_max: usize) -> Result<Vec<f64>> {
    let ks = coefficients(potential, g0, omega, n_max + 1)?;
    let mut rho = vec![0.0; n_max + 1];
    // rho_{n_max} ~ 0; rho_{n-1} = 1 / (2/(r k_n) - rho_n)
    for n in (2..=n_max).rev() {
        rho[n - 1] = 1.0 / (2.0 / (r * ks[n]) - rho[n]);
    }
    rho.remove(0);
    Ok(rho)
}

/// Relative matching defect `(2/(r k_1) - rho_1^min) / (2/(r k_1))`.
pub fn matching_defect(potential: Potential, g0: f64, omega: f64, r: f64) -> Result<f64> {
    let ks = coefficients(potential, g0, omega, CF_DEPTH)?;
    let mut tail = 0.0;
    for n in (2..=CF_DEPTH).rev() {
        tail = 1.0 / (2.0 / (r * ks[n]) - tail);
    }
    let lead = 2.0 / (r * ks[1]);
    Ok((lead - tail) / lead)
}

/// Solvability inequalities
/// `k1 k2 >= 2 k3 (2 k3 - k2)` and `k1 k2 >= k3 (4 k3 - k2)`.
pub fn check_inequalities(potential: Potential, g0: f64, omega: f64) -> Result<bool> {
    let k1 = k_coefficient(potential, g0, omega, 1)?;
    let k2 = k_coefficient(potential, g0, omega, 2)?;
    let k3 = k_coefficient(potential, g0, omega, 3)?;
    Ok(inequalities_hold(k1, k2, k3))
}

pub fn inequalities_hold(k1: f64, k2: f64, k3: f64) -> bool {
    k1 * k2 >= 2.0 * k3 * (2.0 * k3 - k2) && k1 * k2 >= k3 * (4.0 * k3 - k2)
}

/// Sign-change bracketing on a log grid followed by bisection. Brackets that
/// straddle a pole of the defect (large `|F|` at the midpoint) are discarded.
fn roots_on_log_grid(f: &dyn Fn(f64) -> Result<f64>, lo: f64, hi: f64, points: usize, tol: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let step = (hi / lo).ln() / (points - 1) as f64;
    let xs: Vec<f64> = (0..points).map(|i| lo * (step * i as f64).exp()).collect();
    let vals: Vec<Option<f64>> = xs.iter().map(|&x| f(x).ok().filter(|v| v.is_finite())).collect();
    for i in 0..points - 1 {
        let (Some(fa), Some(fb)) = (vals[i], vals[i + 1]) else { continue };
        if fa == 0.0 {
            out.push((xs[i], 0.0));
            continue;
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        let (mut a, mut b, mut fa) = (xs[i], xs[i + 1], fa);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let Ok(fm) = f(m) else { break };
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
            if (b - a) <= 1e-15 * b {
                break;
            }
        }
        let root = 0.5 * (a + b);
        if let Ok(res) = f(root) {
            if res.abs() < tol {
                out.push((root, res.abs()));
            }
        }
    }
    out
}

/// Residual threshold for accepting a bracketed root.
pub const MATCH_TOL: f64 = 1e-9;

/// All `r` in `[1e-3, 20]` with a decaying solution for the given `(a, omega, N)`.
///
/// The solvability inequalities are recorded on each point but do not gate the
/// search: at `a = 4, omega = 1.5` (free pair) the matching root exists and is
/// isolated while the second inequality fails by about 2%.
///
/// The mode follows the potential: `FreeTrap` searches the free-particle
/// manifold, `U1`/`U2` the bound-state one.
pub fn stabilization_roots(potential: Potential, omega: f64, n: u32) -> Result<Vec<StabilizationPoint>> {
    let Some(g0) = stabilization_g0(potential, omega, n)? else { return Ok(Vec::new()) };
    let inequalities = check_inequalities(potential, g0, omega)?;
    let f = |r: f64| matching_defect(potential, g0, omega, r);
    Ok(roots_on_log_grid(&f, 1e-3, 20.0, 600, MATCH_TOL)
        .into_iter()
        .map(|(r_s, residual)| StabilizationPoint { a: potential.a(), omega, r_s, g0, n, residual, inequalities })
        .collect())
}

/// The stabilizing amplitude at `(a, omega, N)`; the smallest root when several exist.
pub fn stabilization_search(potential: Potential, omega: f64, n: u32) -> Result<Option<StabilizationPoint>> {
    Ok(stabilization_roots(potential, omega, n)?.into_iter().next())
}

/// Stabilizing frequency at fixed amplitude `r`, searched over `omega_range`.
pub fn stabilizing_frequency(potential: Potential, r: f64, n: u32, omega_range: (f64, f64)) -> Result<Vec<StabilizationPoint>> {
    let (lo, hi) = omega_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain("omega range must satisfy 0 < lo < hi"));
    }
    let f = |omega: f64| -> Result<f64> {
        let g0 = stabilization_g0(potential, omega, n)?.ok_or_else(|| Error::domain("g0 inadmissible"))?;
        matching_defect(potential, g0, omega, r)
    };
    let mut out = Vec::new();
    for (omega, residual) in roots_on_log_grid(&f, lo, hi, 600, MATCH_TOL) {
        let g0 = stabilization_g0(potential, omega, n)?.expect("checked by f");
        let inequalities = check_inequalities(potential, g0, omega)?;
        out.push(StabilizationPoint { a: potential.a(), omega, r_s: r, g0, n, residual, inequalities });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u1_g0_condition() {
        let g0 = stabilization_g0(Potential::U1 { a: 0.59 }, 1.1, 1).unwrap().unwrap();
        let k = (1.0 + g0).sqrt();
        assert!(((-2.0 * 0.59 * k).exp() - (1.0 - k)).abs() < 1e-14);
        let kp = crate::branchcore::kernel_k_plus(C::new(0.0, g0), 0.59, BranchSpec::HORIZONTAL).unwrap();
        assert!(kp.norm() < 1e-12);
        assert!(stabilization_g0(Potential::U1 { a: 0.45 }, 1.1, 1).unwrap().is_none());
        assert!(stabilization_g0(Potential::U1 { a: 0.59 }, 1.1, 2).unwrap().is_none());
    }

    #[test]
    fn u2_and_free_g0_gates() {
        let g0 = stabilization_g0(Potential::U2 { a: 4.0 }, 2.0, 1).unwrap().unwrap();
        assert!((4.0 * (-1.0 - g0).sqrt() - std::f64::consts::PI).abs() < 1e-14);
        assert!(stabilization_g0(Potential::U2 { a: 1.0 }, 2.0, 1).unwrap().is_none());
        let g0 = stabilization_g0(Potential::FreeTrap { a: 4.0 }, 1.5, 1).unwrap().unwrap();
        assert!((g0 + (std::f64::consts::PI / 4.0).powi(2)).abs() < 1e-15);
        assert!(stabilization_g0(Potential::U2 { a: 0.0 }, 2.0, 1).is_err());
    }

    #[test]
    fn free_coefficients_match_closed_form() {
        let (a, omega) = (4.0, 1.5);
        let g0 = -(std::f64::consts::PI / a).powi(2);
        for n in 1..6usize {
            let e: f64 = g0 + omega * n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let want = (1.0 + sign * (-2.0 * a * e.sqrt()).exp()) / e.sqrt();
            let got = k_coefficient(Potential::FreeTrap { a }, g0, omega, n).unwrap();
            assert_eq!(got, want);
        }
        // n = 1: (1 + e^{-8 sqrt(0.8831)}) / sqrt(0.8831)
        let k1 = k_coefficient(Potential::FreeTrap { a }, g0, omega, 1).unwrap();
        assert!((k1 - 1.06468).abs() < 1e-5, "{k1}");
    }

    #[test]
    fn rho_seed_and_breakdown() {
        let p = Potential::FreeTrap { a: 4.0 };
        let g0 = -(std::f64::consts::PI / 4.0).powi(2);
        let rho = rho_recursion(p, g0, 1.5, 0.7, 10).unwrap();
        let k1 = k_coefficient(p, g0, 1.5, 1).unwrap();
        assert_eq!(rho[0], 2.0 / (0.7 * k1));
        // choose r so that rho_1 = 1/(2/(r k_2))... force rho_2 = 0 exactly
        let k2 = k_coefficient(p, g0, 1.5, 2).unwrap();
        // rho_2 = 2/(r k2) - r k1 / 2 = 0  =>  r^2 = 4 / (k1 k2)
        let r0 = (4.0 / (k1 * k2)).sqrt();
        match rho_recursion(p, g0, 1.5, r0, 5) {
            Err(Error::RhoBreakdown(3)) => {}
            Ok(v) => assert!(v[1].abs() < 1e-15, "{v:?}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn inequality_boundary_is_closed() {
        // equality in the second (binding for k2 > 0): 3 * 1 = 1 * (4 - 1)
        assert!(inequalities_hold(3.0, 1.0, 1.0));
        assert!(!inequalities_hold(3.0 - 1e-12, 1.0, 1.0));
        // equality in both: 0 = 0
        assert!(inequalities_hold(0.0, 1.0, 0.0));
        // equality in the first alone (k2 = 0 makes the two coincide)
        assert!(inequalities_hold(1.0, 0.0, 0.0));
    }

    #[test]
    fn inequalities_follow_the_stated_regimes() {
        let omega = 2.0;
        // g0 + omega small: a sqrt(-1 - g0) = pi with g0 = -omega + 0.01
        let a = std::f64::consts::PI / (omega - 1.0 - 0.01f64).sqrt();
        let g0 = stabilization_g0(Potential::U2 { a }, omega, 1).unwrap().unwrap();
        assert!((g0 + omega - 0.01).abs() < 1e-12);
        assert!(check_inequalities(Potential::U2 { a }, g0, omega).unwrap());
        // large a: g0 -> -1 and omega + g0 ~ 1
        let a = 30.0;
        let g0 = stabilization_g0(Potential::U2 { a }, omega, 1).unwrap().unwrap();
        assert!(!check_inequalities(Potential::U2 { a }, g0, omega).unwrap());
    }

    #[test]
    fn u1_stabilizing_frequency_near_reported_value() {
        let pts = stabilizing_frequency(Potential::U1 { a: 0.59 }, 1.0, 1, (1.0 + 1e-6, 2.0)).unwrap();
        assert!(!pts.is_empty());
        let w = pts[0].omega;
        assert!((w - 1.089).abs() <= 0.010, "omega_s = {w}");
    }

    #[test]
    fn fredholm_dichotomy_in_r() {
        let pt = stabilization_search(Potential::FreeTrap { a: 4.0 }, 1.5, 1).unwrap().unwrap();
        assert!(pt.residual < MATCH_TOL);
        for s in [0.95, 1.05] {
            let d = matching_defect(Potential::FreeTrap { a: 4.0 }, pt.g0, 1.5, pt.r_s * s).unwrap();
            assert!(d.abs() > 10.0 * MATCH_TOL, "{d}");
        }
    }

    #[test]
    fn minimal_solution_decays_like_factorial() {
        let pt = stabilization_search(Potential::FreeTrap { a: 4.0 }, 1.5, 1).unwrap().unwrap();
        let rho = rho_minimal(Potential::FreeTrap { a: 4.0 }, pt.g0, 1.5, pt.r_s, 60).unwrap();
        // |z_{n+1} / z_n| = |rho_n| -> r / (2 sqrt(omega n))
        for n in [20usize, 30, 40] {
            let want = pt.r_s / (2.0 * (1.5 * n as f64).sqrt());
            assert!((rho[n - 1].abs() / want - 1.0).abs() < 0.05, "n {n}: {} vs {want}", rho[n - 1]);
        }
        // and the forward sequence tracks it at the root
        let fwd = rho_recursion(Potential::FreeTrap { a: 4.0 }, pt.g0, 1.5, pt.r_s, 4).unwrap();
        assert!((fwd[0] - rho[0]).abs() < 1e-6 * fwd[0].abs());
    }

    #[test]
    fn inadmissible_g0_gives_none() {
        assert!(stabilization_search(Potential::U2 { a: 1.0 }, 1.5, 1).unwrap().is_none());
        assert!(stabilization_search(Potential::U1 { a: 0.45 }, 1.5, 1).unwrap().is_none());
    }
}
