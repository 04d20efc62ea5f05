//! The Laplace-space Floquet recurrence and its continued-fraction solution.
//!
//! With `y_n = y(p0 + i omega n)` the driven problem becomes
//!
//! ```text
//! y_n = s_n + B_n (y_{n-1} - y_{n+1}),   B_n = -(i g / 2) M_n,
//! M_n = [[k+_n, -k-_n], [k-_n, -k+_n]],  s_n = e^{-a} / (p0 + i omega n) (1, 1)
//! ```
//!
//! where `g` is the signed coupling of the configuration. The single-site
//! potential keeps only the `(0, 0)` entry and a zero second source.

use num_complex::Complex;

use super::mat2::{vadd, vnorm, vsub, M2, V2};
use crate::branchcore::{free_kernel_pair, kernel_pair, BranchSpec, Side};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Potential};
use crate::scalar::Real;

/// Branch used for every kernel, with an optional one-sided override for a
/// single index (the index whose kernel argument lies on its own cut).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPlan {
    pub spec: BranchSpec,
    pub on_cut: Option<(i64, Side)>,
    /// Full override for one index: continuing a kernel onto the sheet that
    /// a local root search wanders into.
    pub index_spec: Option<(i64, BranchSpec)>,
}

impl BranchPlan {
    pub fn new(spec: BranchSpec) -> Self {
        BranchPlan { spec: spec.with_side(Side::Principal), on_cut: None, index_spec: None }
    }

    pub fn with_cut_side(self, n: i64, side: Side) -> Self {
        BranchPlan { on_cut: Some((n, side)), ..self }
    }

    pub fn with_index_spec(self, n: i64, spec: BranchSpec) -> Self {
        BranchPlan { index_spec: Some((n, spec)), ..self }
    }

    fn spec_for(&self, n: i64) -> BranchSpec {
        if let Some((m, spec)) = self.index_spec {
            if m == n {
                return spec;
            }
        }
        match self.on_cut {
            Some((m, side)) if m == n => self.spec.with_side(side),
            _ => self.spec,
        }
    }
}

impl Default for BranchPlan {
    fn default() -> Self {
        BranchPlan::new(BranchSpec::HORIZONTAL)
    }
}

/// Kernel values `(k+, k-)` at `p0 + i omega n` for the configuration.
pub fn kernels_at<T: Real>(config: &ModelConfig, q: Complex<T>, spec: BranchSpec) -> Result<(Complex<T>, Complex<T>)> {
    let a = T::lit(config.a());
    match config.potential {
        Potential::FreeTrap { .. } => free_kernel_pair(q, a, spec),
        _ => kernel_pair(q, a, spec),
    }
}

fn kernel_matrix<T: Real>(config: &ModelConfig, kp: Complex<T>, km: Complex<T>) -> M2<T> {
    let z = Complex::new(T::zero(), T::zero());
    if config.is_scalar() {
        M2::new(kp, z, z, z)
    } else {
        M2::new(kp, -km, km, -kp)
    }
}

#[derive(Debug, Clone)]
pub struct FloquetSystem<T> {
    pub config: ModelConfig,
    pub p0: Complex<T>,
    pub n_min: i64,
    pub n_max: i64,
    /// Scaled blocks `B_n = -(i g / 2) M_n`.
    pub blocks: Vec<M2<T>>,
    pub sources: Vec<V2<T>>,
    pub plan: BranchPlan,
}

/// Assemble the recurrence with `Im p0` in the fundamental strip `[0, omega)`.
pub fn build_system<T: Real>(config: &ModelConfig, p0: Complex<T>, n_window: (i64, i64)) -> Result<FloquetSystem<T>> {
    let im = p0.im.to_f64().unwrap_or(f64::NAN);
    if !(0.0..config.omega).contains(&im) {
        return Err(Error::domain(format!("Im p0 = {im} outside [0, omega)")));
    }
    if !(n_window.0 < 0 && 0 < n_window.1) {
        return Err(Error::domain("the window must contain n = 0 strictly inside"));
    }
    FloquetSystem::assemble(config, p0, n_window, BranchPlan::default())
}

impl<T: Real> FloquetSystem<T> {
    /// Unrestricted assembly: any `p0`, any window containing `0`, any branch plan.
    pub fn assemble(config: &ModelConfig, p0: Complex<T>, n_window: (i64, i64), plan: BranchPlan) -> Result<Self> {
        config.validate()?;
        let (lo, hi) = n_window;
        if lo > 0 || hi < 0 {
            return Err(Error::domain("the window must contain n = 0"));
        }
        let g = T::lit(config.coupling());
        let half = T::lit(0.5);
        // -(i g / 2)
        let scale = Complex::new(T::zero(), -g * half);
        let omega = T::lit(config.omega);
        let ea = T::lit((-config.a()).exp());
        let zero = Complex::new(T::zero(), T::zero());
        let free = matches!(config.potential, Potential::FreeTrap { .. });
        let cap = (hi - lo + 1) as usize;
        let mut blocks = Vec::with_capacity(cap);
        let mut sources = Vec::with_capacity(cap);
        for n in lo..=hi {
            let q = p0 + Complex::new(T::zero(), omega * T::lit(n as f64));
            let (kp, km) = kernels_at(config, q, plan.spec_for(n)).map_err(|e| Error::Singular { n, what: e.to_string() })?;
            blocks.push(kernel_matrix(config, kp, km).scale(scale));
            if free {
                sources.push([zero, zero]);
            } else {
                if q.re == T::zero() && q.im == T::zero() {
                    return Err(Error::Singular { n, what: "source pole at p = 0".into() });
                }
                let s = Complex::new(ea, T::zero()) / q;
                sources.push(if config.is_scalar() { [s, zero] } else { [s, s] });
            }
        }
        Ok(FloquetSystem { config: *config, p0, n_min: lo, n_max: hi, blocks, sources, plan })
    }

    pub fn with_sources(mut self, f: impl Fn(i64) -> V2<T>) -> Self {
        for (i, n) in (self.n_min..=self.n_max).enumerate() {
            self.sources[i] = f(n);
        }
        self
    }

    pub fn block(&self, n: i64) -> &M2<T> {
        &self.blocks[(n - self.n_min) as usize]
    }

    fn resized(&self, window: (i64, i64)) -> Result<Self> {
        let mut sys = FloquetSystem::assemble(&self.config, self.p0, window, self.plan)?;
        // keep caller-supplied sources on the overlap, zero outside
        let zero = Complex::new(T::zero(), T::zero());
        for (i, n) in (window.0..=window.1).enumerate() {
            sys.sources[i] = if n >= self.n_min && n <= self.n_max {
                self.sources[(n - self.n_min) as usize]
            } else if matches!(self.config.potential, Potential::FreeTrap { .. }) {
                [zero, zero]
            } else {
                sys.sources[i]
            };
        }
        Ok(sys)
    }

    /// Block Thomas elimination with `y_{n_min - 1} = y_{n_max + 1} = 0`.
    pub fn solve_truncated(&self) -> Result<Vec<V2<T>>> {
        let len = self.blocks.len();
        let id = M2::identity();
        let mut gs: Vec<M2<T>> = Vec::with_capacity(len);
        let mut hs: Vec<V2<T>> = Vec::with_capacity(len);
        for i in 0..len {
            let b = self.blocks[i];
            // row: y_n + (-B_n) y_{n-1} + B_n y_{n+1} = s_n
            let (d, rhs) = if i == 0 {
                (id, self.sources[0])
            } else {
                (id + b * gs[i - 1], vadd(self.sources[i], b.apply(hs[i - 1])))
            };
            let dinv = d.inverse().ok_or_else(|| Error::Singular {
                n: self.n_min + i as i64,
                what: "pivot block is singular".into(),
            })?;
            gs.push(dinv * b);
            hs.push(dinv.apply(rhs));
        }
        let mut ys = hs.clone();
        for i in (0..len.saturating_sub(1)).rev() {
            ys[i] = vsub(hs[i], gs[i].apply(ys[i + 1]));
        }
        Ok(ys)
    }

    /// Sup-norm defect of the recurrence on the window, boundary values zero.
    pub fn residual(&self, ys: &[V2<T>]) -> T {
        let zero = Complex::new(T::zero(), T::zero());
        let len = ys.len();
        let mut worst = T::zero();
        for i in 0..len {
            let prev = if i == 0 { [zero, zero] } else { ys[i - 1] };
            let next = if i + 1 == len { [zero, zero] } else { ys[i + 1] };
            let rhs = vadd(self.sources[i], self.blocks[i].apply(vsub(prev, next)));
            worst = worst.max(vnorm(vsub(ys[i], rhs)));
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct FloquetSolution<T> {
    pub n_min: i64,
    pub ys: Vec<V2<T>>,
    pub residual: T,
    /// Largest change on the initial window under the last doubling.
    pub doubling_change: T,
    pub window: (i64, i64),
}

impl<T: Real> FloquetSolution<T> {
    pub fn get(&self, n: i64) -> V2<T> {
        let i = n - self.n_min;
        if i < 0 || i as usize >= self.ys.len() {
            let z = Complex::new(T::zero(), T::zero());
            return [z, z];
        }
        self.ys[i as usize]
    }

    /// `f_n = y+_n - y-_n`.
    pub fn f(&self, n: i64) -> Complex<T> {
        let y = self.get(n);
        y[0] - y[1]
    }
}

const MAX_HALF_WINDOW: i64 = 4096;

/// Solve on the system window, doubling it until the solution on the original
/// window moves by less than `tol` (relative to its size).
pub fn solve_inhomogeneous<T: Real>(system: &FloquetSystem<T>, tol: T) -> Result<FloquetSolution<T>> {
    let (lo0, hi0) = (system.n_min, system.n_max);
    let mut sys = system.clone();
    let mut ys = sys.solve_truncated()?;
    loop {
        let (lo, hi) = (sys.n_min, sys.n_max);
        let next = (2 * lo.min(-1), 2 * hi.max(1));
        if next.1 - next.0 > 2 * MAX_HALF_WINDOW {
            let res = sys.residual(&ys).to_f64().unwrap_or(f64::NAN);
            return Err(Error::no_conv("Floquet window doubling", res));
        }
        let bigger = sys.resized(next)?;
        let ys2 = bigger.solve_truncated()?;
        let mut change = T::zero();
        let mut scale = T::zero();
        for n in lo0..=hi0 {
            let a = ys[(n - lo) as usize];
            let b = ys2[(n - next.0) as usize];
            change = change.max(vnorm(vsub(a, b)));
            scale = scale.max(vnorm(b));
        }
        sys = bigger;
        ys = ys2;
        if change <= tol * scale.max(T::eps()) {
            let residual = sys.residual(&ys);
            return Ok(FloquetSolution { n_min: sys.n_min, ys, residual, doubling_change: change, window: (sys.n_min, sys.n_max) });
        }
    }
}

/// Matching function whose zeros are the Floquet poles: the homogeneous
/// recurrence has a solution decaying in both directions.
///
/// Continued-fraction ratios `z_n = R_n z_{n-1}` (n >= 1) and `z_n = L_n z_{n+1}`
/// (n <= -1) are swept in from the window edges; at `n = 0` the condition is
/// `det(M_0^{-1} + c (L_{-1} - R_1)) = 0` with `c = i g / 2`. Using `M_0^{-1}`
/// removes the `1/p` pole that `M_0` carries at the origin.
pub fn pole_function<T: Real>(config: &ModelConfig, p: Complex<T>, half_window: i64, plan: BranchPlan) -> Result<Complex<T>> {
    let sys = FloquetSystem::assemble(config, p, (-half_window, half_window), plan)?;
    let id = M2::identity();
    // B_n = -c M_n
    let mut r = M2::zero();
    for n in (1..=half_window).rev() {
        let b = *sys.block(n);
        // R_n = -(I - c M_n R_{n+1})^{-1} c M_n = (I + B_n R_{n+1})^{-1} B_n
        let d = (id + b * r).inverse().ok_or_else(|| Error::Singular { n, what: "right ratio".into() })?;
        r = d * b;
    }
    let mut l = M2::zero();
    for n in -half_window..=-1 {
        let b = *sys.block(n);
        // L_n = (I + c M_n L_{n-1})^{-1} c M_n = -(I - B_n L_{n-1})^{-1} B_n
        let d = (id - b * l).inverse().ok_or_else(|| Error::Singular { n, what: "left ratio".into() })?;
        l = -(d * b);
    }
    let g = T::lit(config.coupling());
    let c = Complex::new(T::zero(), g * T::lit(0.5));
    let (kp, km) = kernels_at(config, p, plan.spec_for(0))?;
    let diff = (l - r).scale(c);
    if config.is_scalar() {
        // 1/k+ + c (L - R)
        Ok(kp.inv() + diff.m[0][0])
    } else {
        // M^{-1} = M / ((k+)^2 - (k-)^2)
        let one = Complex::new(T::one(), T::zero());
        let det = (kp - km) * (kp + km);
        let inv = M2::new(kp, -km, km, -kp).scale(one / det);
        Ok((inv + diff).det())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branchcore::{kernel_k_plus, BranchSpec};
    use num_complex::Complex64 as C;

    #[test]
    fn decoupled_limit_returns_sources() {
        let cfg = ModelConfig::u2(0.59, 0.0, 1.25).unwrap();
        let p0 = C::new(0.05, 0.3);
        let sys = build_system(&cfg, p0, (-8, 8)).unwrap();
        assert!(sys.blocks.iter().all(|b| b.norm() == 0.0));
        let sol = solve_inhomogeneous(&sys, 1e-12).unwrap();
        for n in -8..=8 {
            let s = C::new((-0.59f64).exp(), 0.0) / (p0 + C::new(0.0, 1.25 * n as f64));
            assert_eq!(sol.get(n), [s, s]);
        }
    }

    #[test]
    fn u2_at_zero_separation_is_inert() {
        // k+ = k- when a = 0: the two sites cancel and y is the source
        let cfg = ModelConfig::u2(0.0, 0.7, 1.3).unwrap();
        let p0 = C::new(0.1, 0.2);
        let sys = build_system(&cfg, p0, (-8, 8)).unwrap();
        let sol = solve_inhomogeneous(&sys, 1e-12).unwrap();
        for n in -4..=4 {
            let s = 1.0 / (p0 + C::new(0.0, 1.3 * n as f64));
            let y = sol.get(n);
            assert!((y[0] - s).norm() < 1e-13 && (y[1] - s).norm() < 1e-13);
        }
    }

    #[test]
    fn u1_blocks_match_hand_composition() {
        let cfg = ModelConfig::u1(0.59, 1.0, 1.12).unwrap();
        let p0 = C::new(0.01, 0.0);
        let sys = build_system(&cfg, p0, (-8, 8)).unwrap();
        for n in [-3i64, -1, 0, 2, 5] {
            let q = p0 + C::new(0.0, 1.12 * n as f64);
            let k = kernel_k_plus(q, 0.59, BranchSpec::HORIZONTAL).unwrap();
            // g = -r for U1, so B = -(i g / 2) k = (i / 2) k
            let want = C::new(0.0, 0.5) * k;
            let b = sys.block(n);
            assert!((b.m[0][0] - want).norm() < 1e-15 * want.norm().max(1.0));
            assert_eq!(b.m[0][1], C::new(0.0, 0.0));
            assert_eq!(b.m[1][1], C::new(0.0, 0.0));
        }
        assert!(build_system(&cfg, C::new(0.0, 1.2), (-8, 8)).is_err());
        assert!(build_system(&cfg, C::new(0.0, 0.0), (-8, 8)).is_err());
    }

    #[test]
    fn small_r_three_term_truncation() {
        // the sources at |n| >= 2 are O(1), so y_0 of the {-1, 0, 1} truncation
        // differs from the full solve at O(r^2); the pole itself moves at O(r^4)
        // (checked in the pole tests)
        let a = 0.59;
        let omega = 1.5;
        let p0 = C::new(0.2, 0.1);
        let mut prev = f64::NAN;
        for r in [0.08, 0.04] {
            let cfg = ModelConfig::u1(a, r, omega).unwrap();
            let full = solve_inhomogeneous(&build_system(&cfg, p0, (-8, 8)).unwrap(), 1e-14).unwrap();
            let small = FloquetSystem::assemble(&cfg, p0, (-1, 1), BranchPlan::default()).unwrap();
            let ys = small.solve_truncated().unwrap();
            let err = (full.get(0)[0] - ys[1][0]).norm();
            if prev.is_finite() {
                let order = (prev / err).log2();
                assert!((order - 2.0).abs() < 0.15, "order {order}");
            }
            prev = err;
        }
    }

    #[test]
    fn doubling_is_stable_and_residual_small() {
        let cfg = ModelConfig::u2(0.9, 1.0, 1.4).unwrap();
        let sys = build_system(&cfg, C::new(0.03, 0.5), (-8, 8)).unwrap();
        let sol = solve_inhomogeneous(&sys, 1e-12).unwrap();
        assert!(sol.residual < 1e-13, "{}", sol.residual);
        let sys2 = FloquetSystem::assemble(&cfg, C::new(0.03, 0.5), (-64, 64), BranchPlan::default()).unwrap();
        let ys = sys2.solve_truncated().unwrap();
        for n in -8..=8 {
            let a = sol.get(n);
            let b = ys[(n + 64) as usize];
            assert!((a[0] - b[0]).norm() < 1e-11 && (a[1] - b[1]).norm() < 1e-11);
        }
    }

    #[test]
    fn generic_f32_solve() {
        let cfg = ModelConfig::u1(0.59, 0.5, 1.3).unwrap();
        let sys = build_system(&cfg, Complex::<f32>::new(0.1, 0.2), (-8, 8)).unwrap();
        let sol32 = solve_inhomogeneous(&sys, 1e-5f32).unwrap();
        let sol64 = solve_inhomogeneous(&build_system(&cfg, C::new(0.1, 0.2), (-8, 8)).unwrap(), 1e-12).unwrap();
        let d = sol32.get(0)[0];
        assert!((C::new(d.re as f64, d.im as f64) - sol64.get(0)[0]).norm() < 1e-4);
    }
}
