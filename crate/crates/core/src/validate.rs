//! Cross-pipeline invariant suite with a pass/fail table.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::branchcore::{kernel_k_minus, kernel_k_plus, sqrt_one_minus_ip, BranchSpec};
use crate::error::Result;
use crate::floquet::{build_system, invert_survival, solve_inhomogeneous, FloquetSystem};
use crate::model::ModelConfig;
use crate::oracle::{discrete_bound_state, evolve_pde_with, Boundary, GridSpec, Initial, OracleOptions};
use crate::timedomain::volterra_survival;
use crate::trace::{max_relative_gap, SurvivalTrace};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Measured worst value against `tolerance`.
    pub value: f64,
    pub tolerance: f64,
    /// Where the worst value occurred.
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:<6} {:>12} {:>12}  {}\n", "invariant", "result", "value", "tolerance", "worst at");
        for c in &self.checks {
            s += &format!(
                "{:<28} {:<6} {:>12.3e} {:>12.3e}  {}\n",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.value,
                c.tolerance,
                c.detail
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// Multiplies every tolerance; 0.1 tightens the suite tenfold.
    pub tol_scale: f64,
    pub seed: u64,
    /// Include the Crank-Nicolson comparisons (a few seconds each).
    pub oracle: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { tol_scale: 1.0, seed: 7, oracle: true }
    }
}

type Branch<'a> = &'a dyn Fn(C) -> Result<C>;

/// Continues `sqrt(1 - ip)` along closed circles clear of every branch point,
/// picking at each step the root nearest the previous one, and returns the
/// worst gap between the continued value and `branch`, with its location.
pub fn branch_continuity(branch: Branch) -> Result<(f64, C)> {
    let circles = [(C::new(0.0, 0.0), 0.5), (C::new(0.7, 0.3), 0.6), (C::new(-0.2, 2.0), 1.5), (C::new(0.0, -3.0), 1.5)];
    let mut worst = (0.0, C::new(0.0, 0.0));
    for (c, rad) in circles {
        let n = 4000;
        let start = c + rad;
        let mut cur = branch(start)?;
        for k in 1..=n {
            let p = c + C::from_polar(rad, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            let w = (C::new(1.0, 0.0) - C::new(0.0, 1.0) * p).sqrt();
            cur = if (w - cur).norm() <= (-w - cur).norm() { w } else { -w };
            let gap = (cur - branch(p)?).norm();
            if gap > worst.0 {
                worst = (gap, p);
            }
        }
    }
    Ok(worst)
}

fn check(name: &'static str, value: f64, tolerance: f64, detail: String) -> Check {
    Check { name, passed: value <= tolerance, value, tolerance, detail }
}

pub fn run_validation(opts: &ValidateOptions) -> Result<ValidationReport> {
    let library: Branch = &|p| sqrt_one_minus_ip(p, BranchSpec::default());
    run_validation_with(opts, library)
}

/// The suite with the branch function under test injected.
pub fn run_validation_with(opts: &ValidateOptions, branch: Branch) -> Result<ValidationReport> {
    let s = opts.tol_scale;
    let mut rep = ValidationReport::default();
    let mut traces: Vec<SurvivalTrace> = Vec::new();

    let (gap, at) = branch_continuity(branch)?;
    rep.checks.push(check("branch continuity", gap, 1e-10 * s, format!("p = {at:.4}")));

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = (0.0, C::new(0.0, 0.0), 0.0);
    for _ in 0..200 {
        let p = C::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let a = rng.gen_range(0.0..3.0);
        let spec = BranchSpec::default();
        let (Ok(kp), Ok(km), Ok(w)) = (kernel_k_plus(p, a, spec), kernel_k_minus(p, a, spec), sqrt_one_minus_ip(p, spec)) else { continue };
        let e = (kp * w - km - 1.0).norm() / (1.0 + km.norm());
        if e > worst.0 {
            worst = (e, p, a);
        }
    }
    rep.checks.push(check("kernel identity", worst.0, 1e-12 * s, format!("p = {:.4}, a = {:.3}", worst.1, worst.2)));

    let ts: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    let free = ModelConfig::u2(0.8, 0.0, 1.3)?;
    let lap0 = invert_survival(&free, &ts)?;
    let dev = lap0.theta.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    rep.checks.push(check("r = 0, Laplace (exact)", dev, 0.0, String::new()));
    let vol0 = volterra_survival(&free, 20.0, 0.01)?;
    let dev = vol0.theta.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    rep.checks.push(check("r = 0, Volterra", dev, 1e-10 * s, String::new()));
    traces.extend([lap0, vol0]);

    let pair = ModelConfig::u2(0.7, 0.9, 1.35)?;
    let ts1: Vec<f64> = (1..=20).map(|i| i as f64).collect();
    let lp = invert_survival(&pair, &ts1)?;
    let lm = invert_survival(&pair.with_r(-pair.r), &ts1)?;
    let (d, t) = lp.theta.iter().zip(&lm.theta).zip(&ts1).map(|((a, b), t)| ((a.norm_sqr() - b.norm_sqr()).abs(), *t)).fold((0.0, 0.0), |m, x| if x.0 > m.0 { x } else { m });
    rep.checks.push(check("U2 parity, Laplace", d, 1e-9 * s, format!("t = {t}")));
    let vp = volterra_survival(&pair, 20.0, 0.02)?;
    let vm = volterra_survival(&pair.with_r(-pair.r), 20.0, 0.02)?;
    let (d, t) = vp.theta.iter().zip(&vm.theta).zip(&vp.t_grid).map(|((a, b), t)| ((a.norm_sqr() - b.norm_sqr()).abs(), *t)).fold((0.0, 0.0), |m, x| if x.0 > m.0 { x } else { m });
    rep.checks.push(check("U2 parity, Volterra", d, 1e-12 * s, format!("t = {t:.2}")));
    traces.extend([lp, lm, vp, vm]);

    let mut worst = (0.0, String::new());
    for cfg in [ModelConfig::u1(0.59, 1.0, 1.25)?, ModelConfig::u2(0.9, 1.0, 1.4)?, ModelConfig::u1(1.2, 0.4, 0.6)?] {
        let sys: FloquetSystem<f64> = build_system(&cfg, C::new(0.03, 0.4), (-8, 8))?;
        let sol = solve_inhomogeneous(&sys, 1e-12)?;
        let wide = FloquetSystem::assemble(&cfg, C::new(0.03, 0.4), (-128, 128), Default::default())?.solve_truncated()?;
        for n in -8i64..=8 {
            let (a, b) = (sol.get(n), wide[(n + 128) as usize]);
            let e = (a[0] - b[0]).norm().max((a[1] - b[1]).norm()) / (1.0 + b[0].norm());
            if e > worst.0 {
                worst = (e, format!("{} n = {n}", cfg.potential.label()));
            }
        }
    }
    rep.checks.push(check("truncation doubling", worst.0, 1e-10 * s, worst.1));

    let agree = ModelConfig::u1(0.59, 1.0, 1.25)?;
    let ts50: Vec<f64> = (1..=50).map(|i| i as f64).collect();
    let lap = invert_survival(&agree, &ts50)?;
    let vol = volterra_survival(&agree, 50.0, 0.0125)?;
    let (rel, t) = max_relative_gap(&lap, &vol, 1e-6);
    rep.checks.push(check("Laplace vs Volterra", rel, 1e-3 * s, format!("t = {t}")));

    let dxs = [0.05, 0.025];
    let es: Vec<f64> = dxs.iter().map(|&dx| discrete_bound_state(&GridSpec { half_width: 30.0, dx, dt: 0.01, boundary: Boundary::HardWall }).0).collect();
    let worst_c = es.iter().zip(&dxs).map(|(e, dx)| (e + 1.0).abs() / (dx * dx)).fold(0.0, f64::max);
    rep.checks.push(check("bound energy -1 + O(dx^2)", worst_c, 0.3 * s.max(1.0), format!("|E + 1| / dx^2, E = {:.8}", es[1])));

    if opts.oracle {
        let grid = GridSpec::for_config(&agree, 50.0)?;
        let run = evolve_pde_with(&agree, &Initial::BoundState, &grid, 50.0, &OracleOptions { stride: 100, ..Default::default() })?;
        let drift = run.norm.iter().zip(&run.t).skip(1).map(|(n, t)| (n - run.norm[0]).abs() / t).fold(0.0, f64::max);
        rep.checks.push(check("oracle unitarity", drift, 1e-6 * s, "per unit time".into()));
        let orc = run.survival_trace()?;
        let (rel, t) = max_relative_gap(&orc, &lap, 1e-6);
        rep.checks.push(check("oracle vs Laplace", rel, 1e-2 * s, format!("t = {t}")));
        let (rel, t) = max_relative_gap(&orc, &vol, 1e-6);
        rep.checks.push(check("oracle vs Volterra", rel, 1e-2 * s, format!("t = {t}")));
        traces.push(orc);
    }
    traces.extend([lap, vol]);

    let (excess, which) = traces.iter().map(|t| (t.bound_excess(), t.pipeline.label())).fold((f64::NEG_INFINITY, ""), |m, x| if x.0 > m.0 { x } else { m });
    rep.checks.push(check("|theta| <= 1 + 1e-6", excess.max(0.0), 1e-6 * s, which.to_string()));
    Ok(rep)
}
