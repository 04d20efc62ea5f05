//! Inversion of the survival transform `theta^(p) = (1 + D(p)) / p`, with
//! `D(p) = g e^{-a} [f(p - i omega) - f(p + i omega)]` and `f = y+ - y-`.
//!
//! Two routes. `Bromwich` sums the transform on the line `Re p = c` with a
//! trapezoid rule whose spacing and shift are tied to `t_max`, after the
//! zeroth-order part (`1/p` and the first Born term) is removed and added back
//! in closed form. `Decomposition` pushes the contour left: Floquet pole
//! residues plus one integral per horizontal cut. It is cheap at any `t` but
//! needs `t` away from zero; it is the long-time route.

use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::pole::{branch_local_p, find_pole_with, find_poles_near_branch, kappa_on_physical_sheet, nearest_branch_point, PoleOptions};
use super::system::{solve_inhomogeneous, BranchPlan, FloquetSystem};
use crate::branchcore::{BranchSpec, CutDirection, Side};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Potential};
use crate::quad::{gauss_legendre, pairwise_sum};
use crate::trace::{Pipeline, SurvivalTrace};

const SOLVE_TOL: f64 = 1e-13;
const ORIGIN_RESIDUE_FLOOR: f64 = 1e-12;

/// `D(p)` on the given branch plan.
pub fn drive_term(config: &ModelConfig, p: C, plan: BranchPlan) -> Result<C> {
    let sys = FloquetSystem::assemble(config, p, (-8, 8), plan)?;
    let sol = solve_inhomogeneous(&sys, SOLVE_TOL)?;
    let g = config.coupling();
    Ok((sol.f(-1) - sol.f(1)) * (g * (-config.a()).exp()))
}

/// `D(p)` from a single truncated solve on `[-w, w]`.
fn drive_term_window(config: &ModelConfig, p: C, plan: BranchPlan, w: i64) -> Result<C> {
    let sys = FloquetSystem::assemble(config, p, (-w, w), plan)?;
    let ys = sys.solve_truncated()?;
    let f = |n: i64| {
        let y = ys[(n + w) as usize];
        y[0] - y[1]
    };
    Ok((f(-1) - f(1)) * (config.coupling() * (-config.a()).exp()))
}

/// Smallest doubling of the half-window 8 for which `D` on the line
/// `Re p = c` no longer moves at the sampled heights.
fn line_window(config: &ModelConfig, c: f64, plan: BranchPlan) -> Result<i64> {
    let w0 = config.omega;
    let heights = [0.0, 1.0, -1.0, w0, -w0, w0 - 1.0, -1.0 - w0, 0.5 * w0];
    let mut w = 8;
    while w <= 1024 {
        let mut worst: f64 = 0.0;
        for &y in &heights {
            let p = C::new(c, y);
            let d1 = drive_term_window(config, p, plan, w)?;
            let d2 = drive_term_window(config, p, plan, 2 * w)?;
            worst = worst.max((d1 - d2).norm() / d2.norm().max(1.0));
        }
        if worst <= SOLVE_TOL {
            return Ok(w);
        }
        w *= 2;
    }
    Err(Error::no_conv("Bromwich line truncation", f64::NAN))
}

/// The survival transform `(1 + D(p)) / p`.
pub fn survival_transform(config: &ModelConfig, p: C, plan: BranchPlan) -> Result<C> {
    Ok((1.0 + drive_term(config, p, plan)?) / p)
}

/// First Born part of `D`: only the sources, `g e^{-a} (s_{-1} - s_1)`.
fn born_term(config: &ModelConfig, p: C) -> C {
    match config.potential {
        Potential::U1 { a } => {
            let w = C::new(0.0, config.omega);
            config.coupling() * (-2.0 * a).exp() * (1.0 / (p - w) - 1.0 / (p + w))
        }
        _ => C::new(0.0, 0.0),
    }
}

/// Time-domain counterpart of `born_term / p`.
pub fn born_theta(config: &ModelConfig, t: f64) -> C {
    match config.potential {
        Potential::U1 { a } => {
            let w = config.omega;
            C::new(0.0, 2.0 * config.coupling() * (-2.0 * a).exp() / w * (1.0 - (w * t).cos()))
        }
        _ => C::new(0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InversionMethod {
    Bromwich,
    Decomposition,
}

#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    pub method: InversionMethod,
    /// Line shift `c = shift / t_max`.
    pub shift: f64,
    /// Alias period `T = alias * t_max`; the alias error is `exp(-c T)`.
    pub alias: f64,
    /// Starting half-height of the line; doubled until the tail is negligible.
    pub y_max: f64,
    pub tail_tol: f64,
    /// Cap on the harmonics of the decomposition; poles and cuts are added
    /// in shells `+-m` until two shells contribute less than `harmonic_tol`.
    pub harmonics: i64,
    pub harmonic_tol: f64,
    /// Cut orientation for the decomposition.
    pub cut: CutDirection,
}

impl Default for InversionOptions {
    fn default() -> Self {
        InversionOptions {
            method: InversionMethod::Bromwich,
            shift: 2.0,
            alias: 12.0,
            y_max: 200.0,
            tail_tol: 1e-11,
            harmonics: 64,
            harmonic_tol: 1e-13,
            cut: CutDirection::HorizontalLeft,
        }
    }
}

impl InversionOptions {
    pub fn decomposition() -> Self {
        InversionOptions { method: InversionMethod::Decomposition, ..Self::default() }
    }
}

/// Evaluate `theta(t)` on `t_grid` (ascending, starting at 0 for Bromwich).
pub fn invert_survival(config: &ModelConfig, t_grid: &[f64]) -> Result<SurvivalTrace> {
    invert_survival_with(config, t_grid, InversionOptions::default())
}

pub fn invert_survival_with(config: &ModelConfig, t_grid: &[f64], opts: InversionOptions) -> Result<SurvivalTrace> {
    config.validate()?;
    if matches!(config.potential, Potential::FreeTrap { .. }) {
        return Err(Error::domain("the survival transform needs a bound state"));
    }
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] < 0.0 {
        return Err(Error::domain("t grid must be non-empty, ascending and non-negative"));
    }
    let theta = if config.r == 0.0 {
        vec![C::new(1.0, 0.0); t_grid.len()]
    } else {
        match opts.method {
            InversionMethod::Bromwich => bromwich(config, t_grid, &opts)?,
            InversionMethod::Decomposition => Decomposition::new(config, t_grid, &opts)?.evaluate(t_grid),
        }
    };
    SurvivalTrace::new(t_grid.to_vec(), theta, Pipeline::Laplace, *config)
}

fn bromwich(config: &ModelConfig, t_grid: &[f64], opts: &InversionOptions) -> Result<Vec<C>> {
    let t_max = t_grid[t_grid.len() - 1].max(1.0);
    let c = opts.shift / t_max;
    let dy = 2.0 * std::f64::consts::PI / (opts.alias * t_max);
    let plan = BranchPlan::default();
    let w = line_window(config, c, plan)?;
    let rem = |y: f64| -> Result<C> {
        let p = C::new(c, y);
        let d = drive_term_window(config, p, plan, w)?;
        Ok((d - born_term(config, p)) / p)
    };
    // extend the line until the dropped tail is below tolerance
    let mut y_max = opts.y_max;
    loop {
        let edge = rem(y_max)?.norm().max(rem(-y_max)?.norm());
        // |R| falls off like |y|^{-4.5}: the dropped tail is about edge y_max / 3.5
        if edge * y_max / 3.5 < opts.tail_tol {
            break;
        }
        if y_max > 1e5 {
            return Err(Error::Quadrature { what: "Bromwich tail".into(), achieved: edge * y_max, requested: opts.tail_tol });
        }
        y_max *= 2.0;
    }
    let k_max = (y_max / dy).ceil() as i64;
    let values: Vec<C> = (-k_max..=k_max)
        .into_par_iter()
        .map(|k| rem(k as f64 * dy))
        .collect::<Result<Vec<_>>>()?;
    let y0 = -(k_max as f64) * dy;
    let out = t_grid
        .par_iter()
        .map(|&t| {
            // e^{i y t} by rotation, reseeded every chunk
            const CHUNK: usize = 512;
            let step = C::new(0.0, dy * t).exp();
            let chunks: Vec<C> = values
                .chunks(CHUNK)
                .enumerate()
                .map(|(j, vs)| {
                    let mut ph = C::new(0.0, (y0 + (j * CHUNK) as f64 * dy) * t).exp();
                    let mut s = C::new(0.0, 0.0);
                    for v in vs {
                        s += v * ph;
                        ph *= step;
                    }
                    s
                })
                .collect();
            let integral = pairwise_sum(&chunks) * (dy / (2.0 * std::f64::consts::PI) * (c * t).exp());
            1.0 + born_theta(config, t) + integral
        })
        .collect();
    Ok(out)
}

/// Pole residues plus cut integrals, with the cut integrands cached on a
/// fixed node set so every `t` reuses them.
pub struct Decomposition {
    omega: f64,
    poles: Vec<(C, C)>,
    /// Per cut: branch point, direction `e^{i phi}`, nodes `s_j`, weights
    /// `w_j` and jumps `J(s_j)`.
    cuts: Vec<CutData>,
}

struct CutData {
    branch: C,
    dir: C,
    s: Vec<f64>,
    w: Vec<f64>,
    jump: Vec<C>,
}

impl Decomposition {
    pub fn new(config: &ModelConfig, t_grid: &[f64], opts: &InversionOptions) -> Result<Self> {
        let t_min = t_grid.iter().copied().find(|&t| t > 0.0).unwrap_or(1.0);
        let t_max = t_grid[t_grid.len() - 1].max(t_min);
        let omega = config.omega;
        let spec = BranchSpec::new(opts.cut, Side::Principal);
        let plan = BranchPlan::new(spec);
        let m_cap = opts.harmonics;

        let phi = opts.cut.p_angle();
        let dir = C::from_polar(1.0, phi);
        // circles must stay clear of the origin and of every cut
        let cut_clearance = |z: C| {
            let m0 = (-(z.im + 1.0) / omega).round() as i64;
            (m0 - 2..=m0 + 2)
                .map(|m| ray_distance(z, C::new(0.0, -1.0 - omega * m as f64), dir))
                .fold(f64::INFINITY, f64::min)
        };
        let strip_poles = physical_poles(config, plan, opts.cut)?;
        let mut poles = Vec::new();
        for &xi in &strip_poles {
            let radius = (0.25 * xi.norm()).min(0.5 * cut_clearance(xi));
            let residue = |n: i64| -> Result<(C, C)> {
                let z = xi + C::new(0.0, omega * n as f64);
                Ok((z, circle_residue(config, z, radius, plan)?))
            };
            poles.extend(outward(m_cap, opts.harmonic_tol, |n| {
                let r = residue(n)?;
                Ok((r.1.norm(), r))
            })?);
        }
        let xi_min = strip_poles.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        // residue at the origin (zero away from the stabilization manifold)
        let origin = C::new(0.0, 0.0);
        let r0 = (0.25 * xi_min).max(1e-6).min(1e-3).min(0.5 * cut_clearance(origin));
        let res0 = circle_residue(config, origin, r0, plan)?;
        // off the stabilization manifold this is rounding noise, which would
        // otherwise show up as a constant floor under the t^{-3} tail
        if res0.norm() > ORIGIN_RESIDUE_FLOOR {
            poles.push((origin, res0));
        }

        // u = sqrt(s): geometric panels from 1e-2/sqrt(t_max) to sqrt(45/t_min)
        let (gx, gw) = gauss_legendre(16);
        let u_lo = 1e-2 / t_max.sqrt();
        let u_hi = (45.0 / t_min).sqrt();
        let mut edges = vec![0.0, u_lo];
        while *edges.last().unwrap() < u_hi {
            let e = edges.last().unwrap() * 1.6;
            edges.push(e.min(u_hi));
        }
        let mut us = Vec::new();
        let mut uw = Vec::new();
        for e in edges.windows(2) {
            let (mid, half) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
            for (x, w) in gx.iter().zip(&gw) {
                us.push(mid + half * x);
                uw.push(half * w);
            }
        }
        // ds = 2u du
        let s: Vec<f64> = us.iter().map(|u| u * u).collect();
        let w: Vec<f64> = us.iter().zip(&uw).map(|(u, w)| 2.0 * u * w).collect();
        let cut = |m: i64| -> Result<(f64, CutData)> {
            let branch = C::new(0.0, -1.0 - omega * m as f64);
            let jump: Vec<C> = s
                .par_iter()
                .map(|&s| {
                    let p = branch + dir * s;
                    let above = survival_transform(config, p, plan.with_cut_side(m, Side::Above))?;
                    let below = survival_transform(config, p, plan.with_cut_side(m, Side::Below))?;
                    Ok(above - below)
                })
                .collect::<Result<Vec<_>>>()?;
            let size = jump.iter().zip(&w).map(|(j, w)| j.norm() * w).sum::<f64>() / (2.0 * std::f64::consts::PI);
            Ok((size, CutData { branch, dir, s: s.clone(), w: w.clone(), jump }))
        };
        let cuts = outward(m_cap, opts.harmonic_tol, cut)?;
        Ok(Decomposition { omega, poles, cuts })
    }

    pub fn poles(&self) -> &[(C, C)] {
        &self.poles
    }

    pub fn evaluate(&self, t_grid: &[f64]) -> Vec<C> {
        let _ = self.omega;
        t_grid.iter().map(|&t| self.at(t)).collect()
    }

    /// Pole part and cut part at `t`.
    pub fn split(&self, t: f64) -> (C, C) {
        let poles = pairwise_sum(&self.poles.iter().map(|(z, res)| res * (z * t).exp()).collect::<Vec<_>>());
        let mut cut_terms = Vec::with_capacity(self.cuts.len());
        for cut in &self.cuts {
            let terms: Vec<C> = cut
                .s
                .iter()
                .zip(&cut.w)
                .zip(&cut.jump)
                .map(|((&s, &w), &j)| j * w * (cut.dir * (s * t)).exp())
                .collect();
            // wrapped contour: (e^{i phi} / 2 pi i) int (above - below) e^{p t} ds
            let val = pairwise_sum(&terms) * (cut.branch * t).exp() * cut.dir / C::new(0.0, 2.0 * std::f64::consts::PI);
            cut_terms.push(val);
        }
        (poles, pairwise_sum(&cut_terms))
    }

    pub fn at(&self, t: f64) -> C {
        let (p, c) = self.split(t);
        p + c
    }
}

/// Poles of the `n = 0` strip on the sheet reached from the right half plane.
/// An isolated pole comes from the secant search. Next to a branch point the
/// search runs in the local uniformizer instead, which also finds roots that
/// the chosen cut orientation hides on a neighbouring sheet; those are dropped.
fn physical_poles(config: &ModelConfig, plan: BranchPlan, cut: CutDirection) -> Result<Vec<C>> {
    if config.r == 0.0 {
        return Ok(vec![]);
    }
    let opts = PoleOptions { plan, ..PoleOptions::default() };
    let direct = find_pole_with(config, C::new(0.0, 0.0), opts);
    let mut out = Vec::new();
    let (centre, scale) = match direct {
        Ok(p) if p.converged => return Ok(vec![p.xi0]),
        Ok(p) => {
            out.push(p.xi0);
            let b = nearest_branch_point(p.xi0, config.omega);
            (p.xi0, (p.xi0 - b).norm().sqrt())
        }
        Err(Error::NonConvergence { .. }) => (C::new(0.0, 0.0), 0.1 * config.r * config.r),
        Err(e) => return Err(e),
    };
    let b = nearest_branch_point(centre, config.omega);
    let m = (-(b.im + 1.0) / config.omega).round() as i64;
    for k in find_poles_near_branch(config, m, scale, opts)? {
        let z = branch_local_p(config.omega, m, k);
        let tol = 1e-6 * (z - b).norm().max(1e-300);
        if kappa_on_physical_sheet(k, cut) && !out.iter().any(|p: &C| (p - z).norm() < tol) {
            out.push(z);
        }
    }
    Ok(out)
}

/// Terms `n = 0, +-1, +-2, ...` until two successive shells fall below `tol`.
fn outward<X>(cap: i64, tol: f64, mut term: impl FnMut(i64) -> Result<(f64, X)>) -> Result<Vec<X>> {
    let mut out = vec![term(0)?.1];
    let mut quiet = 0;
    for n in 1..=cap {
        let (a, x) = term(n)?;
        let (b, y) = term(-n)?;
        out.push(x);
        out.push(y);
        quiet = if a.max(b) < tol { quiet + 1 } else { 0 };
        if quiet == 2 {
            return Ok(out);
        }
    }
    Err(Error::no_conv("harmonic sum of the contour decomposition", f64::NAN))
}

/// Distance from `z` to the ray `b + s dir`, `s >= 0`.
fn ray_distance(z: C, b: C, dir: C) -> f64 {
    let d = z - b;
    let along = (d * dir.conj()).re;
    if along <= 0.0 {
        d.norm()
    } else {
        (d * dir.conj()).im.abs()
    }
}

/// Residue of the survival transform at `z` by the trapezoid rule on a circle.
fn circle_residue(config: &ModelConfig, z: C, radius: f64, plan: BranchPlan) -> Result<C> {
    let n = 64;
    let vals: Vec<C> = (0..n)
        .into_par_iter()
        .map(|k| {
            let e = C::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            Ok(survival_transform(config, z + e, plan)? * e)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&vals) / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn undriven_survival_is_exactly_one() {
        let cfg = ModelConfig::u1(0.59, 0.0, 1.25).unwrap();
        let tr = invert_survival(&cfg, &grid(10.0, 20)).unwrap();
        assert!(tr.theta.iter().all(|z| *z == C::new(1.0, 0.0)));
    }

    #[test]
    fn decomposition_matches_bromwich() {
        let cfg = ModelConfig::u1(0.59, 0.1, 1.5).unwrap();
        let ts: Vec<f64> = (1..=20).map(|i| 2.0 * i as f64).collect();
        let mut full = vec![0.0];
        full.extend(&ts);
        let b = invert_survival(&cfg, &full).unwrap();
        let d = invert_survival_with(&cfg, &ts, InversionOptions::decomposition()).unwrap();
        for i in 0..ts.len() {
            assert!((b.theta[i + 1] - d.theta[i]).norm() < 1e-9, "t = {}", ts[i]);
        }
    }

    #[test]
    fn u2_survival_is_parity_invariant() {
        let cfg = ModelConfig::u2(0.8, 0.4, 1.3).unwrap();
        let ts = [5.0, 20.0, 60.0];
        let a = invert_survival_with(&cfg, &ts, InversionOptions::decomposition()).unwrap();
        let b = invert_survival_with(&cfg.with_r(-0.4), &ts, InversionOptions::decomposition()).unwrap();
        for (x, y) in a.theta.iter().zip(&b.theta) {
            assert!((x.norm_sqr() - y.norm_sqr()).abs() < 1e-10);
        }
        assert!(a.theta[2].norm() < 1.0);
    }

    #[test]
    fn cut_part_carries_the_cubic_tail() {
        let cfg = ModelConfig::u1(0.59, 0.1, 1.5).unwrap();
        let ts: Vec<f64> = (0..=40).map(|i| 1e5 * 10f64.powf(i as f64 / 40.0)).collect();
        let dec = Decomposition::new(&cfg, &ts, &InversionOptions::decomposition()).unwrap();
        let (lx, ly): (Vec<f64>, Vec<f64>) = ts.iter().map(|&t| (t.ln(), dec.at(t).norm_sqr().ln())).unzip();
        let n = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 3.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn ray_distance_cases() {
        let dir = C::new(-1.0, 0.0);
        let b = C::new(0.0, -1.0);
        assert!((ray_distance(C::new(-3.0, -0.5), b, dir) - 0.5).abs() < 1e-15);
        assert!((ray_distance(C::new(3.0, -1.0), b, dir) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn bromwich_starts_at_one() {
        let cfg = ModelConfig::u1(0.59, 0.5, 1.5).unwrap();
        let tr = invert_survival(&cfg, &grid(10.0, 10)).unwrap();
        assert!((tr.theta[0] - 1.0).norm() < 1e-8, "{}", tr.theta[0]);
    }
}
