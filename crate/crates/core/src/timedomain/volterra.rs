//! Marching the site amplitudes `Y+-(t) = e^{-it} psi(+-a, t)`:
//!
//! ```text
//! Y = F + int_0^t eta(s) M(t - s) Y(s) ds,   M = [[S, -X], [X, -S]]
//! ```
//!
//! with `S = K+`, `X = K-` and `eta = g sin(omega s)` for the bound problem.
//! A single site keeps only `Y+` and `S`.

use num_complex::Complex64 as C;

use super::kernels::{kernel_weights, ConvolutionWeights, KernelKind};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Potential};
use crate::trace::{Pipeline, SurvivalTrace};

/// Marched amplitudes on `t_j = j h`.
#[derive(Debug, Clone)]
pub struct VolterraState {
    pub config: ModelConfig,
    pub h: f64,
    pub y_plus: Vec<C>,
    /// Empty for a single site.
    pub y_minus: Vec<C>,
    pub weights: Vec<ConvolutionWeights>,
}

impl VolterraState {
    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.y_plus.len()).map(|j| j as f64 * self.h).collect()
    }
}

/// Solve the pair (or the single equation) with forcing `forcing(j)`, drive
/// `eta` and weights `same` / `cross`, for `n` steps.
///
/// The history sums are direct, O(n^2); they are the part a blocked FFT
/// convolution would replace.
pub fn march(n: usize, h: f64, forcing: &dyn Fn(usize) -> [C; 2], eta: &dyn Fn(f64) -> C, same: &ConvolutionWeights, cross: Option<&ConvolutionWeights>) -> Result<(Vec<C>, Vec<C>)> {
    if same.interior.len() < n + 1 || cross.is_some_and(|c| c.interior.len() < n + 1) {
        return Err(Error::domain("weights do not cover the requested steps"));
    }
    let zero = C::new(0.0, 0.0);
    let pair = cross.is_some();
    let ws = &same.interior;
    let wx = cross.map(|c| &c.interior[..]).unwrap_or(&[]);
    let mut y1 = Vec::with_capacity(n + 1);
    let mut y2 = Vec::with_capacity(n + 1);
    // phi = eta Y, the data under the integral
    let mut p1 = Vec::with_capacity(n + 1);
    let mut p2 = Vec::with_capacity(n + 1);
    let f0 = forcing(0);
    y1.push(f0[0]);
    y2.push(if pair { f0[1] } else { zero });
    let e0 = eta(0.0);
    p1.push(e0 * y1[0]);
    p2.push(e0 * y2[0]);
    for step in 1..=n {
        let f = forcing(step);
        // endpoint panel, then interior history j = 1 .. step-1
        let mut s1 = same.endpoint[step] * p1[0];
        let mut s2 = same.endpoint[step] * p2[0];
        let (mut x1, mut x2) = (zero, zero);
        if let Some(c) = cross {
            x1 = c.endpoint[step] * p1[0];
            x2 = c.endpoint[step] * p2[0];
        }
        for (w, (a, b)) in ws[1..step].iter().zip(p1[1..step].iter().zip(&p2[1..step]).rev()) {
            s1 += w * a;
            s2 += w * b;
        }
        if pair {
            for (w, (a, b)) in wx[1..step].iter().zip(p1[1..step].iter().zip(&p2[1..step]).rev()) {
                x1 += w * a;
                x2 += w * b;
            }
        }
        let e = eta(step as f64 * h);
        let r1 = f[0] + s1 - x2;
        if pair {
            let r2 = f[1] + x1 - s2;
            // (I - e M0) Y = r with M0 = [[s, -x], [x, -s]]
            let (s0, x0) = (e * ws[0], e * wx[0]);
            let (a11, a12, a21, a22) = (1.0 - s0, x0, -x0, 1.0 + s0);
            let det = a11 * a22 - a12 * a21;
            if det.norm() < 1e-14 {
                return Err(Error::Singular { n: step as i64, what: "implicit Volterra step".into() });
            }
            let v1 = (a22 * r1 - a12 * r2) / det;
            let v2 = (a11 * r2 - a21 * r1) / det;
            y1.push(v1);
            y2.push(v2);
        } else {
            let a = 1.0 - e * ws[0];
            if a.norm() < 1e-14 {
                return Err(Error::Singular { n: step as i64, what: "implicit Volterra step".into() });
            }
            y1.push(r1 / a);
            y2.push(zero);
        }
        p1.push(e * y1[step]);
        p2.push(e * y2[step]);
        if !(y1[step].re.is_finite() && y1[step].im.is_finite() && y2[step].re.is_finite() && y2[step].im.is_finite()) {
            return Err(Error::NonFinite("Volterra march"));
        }
    }
    Ok((y1, y2))
}

/// March the bound problem to `t_max` with step `h <= 2 pi / (40 omega)`.
pub fn solve_volterra(config: &ModelConfig, t_max: f64, h: f64) -> Result<VolterraState> {
    config.validate()?;
    if matches!(config.potential, Potential::FreeTrap { .. }) {
        return Err(Error::domain("the free trap is marched by freeparticle::trapped_evolution"));
    }
    if !(t_max > 0.0 && h > 0.0) {
        return Err(Error::domain("t_max and h must be > 0"));
    }
    if config.omega > 0.0 && h > config.period() / 40.0 * (1.0 + 1e-12) {
        return Err(Error::domain(format!("h = {h} does not resolve the drive period (need h <= {})", config.period() / 40.0)));
    }
    let n = (t_max / h).round() as usize;
    if ((n as f64) * h - t_max).abs() > 1e-9 * t_max {
        return Err(Error::domain("t_max must be a multiple of h"));
    }
    let a = config.a();
    let ea = (-a).exp();
    let g = config.coupling();
    let omega = config.omega;
    let same = kernel_weights(a, KernelKind::Plus, h, n)?;
    let cross = if config.is_scalar() { None } else { Some(kernel_weights(a, KernelKind::Minus, h, n)?) };
    let forcing = |_: usize| [C::new(ea, 0.0); 2];
    let eta = |t: f64| C::new(g * (omega * t).sin(), 0.0);
    let (y_plus, y_minus) = march(n, h, &forcing, &eta, &same, cross.as_ref())?;
    let mut weights = vec![same];
    let y_minus = match cross {
        Some(c) => {
            weights.push(c);
            y_minus
        }
        None => Vec::new(),
    };
    Ok(VolterraState { config: *config, h, y_plus, y_minus, weights })
}

/// Cumulative integral of samples on a uniform grid, third order per panel:
/// each panel uses the parabola through it and one neighbour.
pub fn cumulative_integral(f: &[C], h: f64) -> Vec<C> {
    let n = f.len();
    let mut out = vec![C::new(0.0, 0.0); n];
    for j in 0..n.saturating_sub(1) {
        let panel = if n < 3 {
            (f[j] + f[j + 1]) * (0.5 * h)
        } else if j == 0 {
            (f[0] * 5.0 + f[1] * 8.0 - f[2]) * (h / 12.0)
        } else {
            (-f[j - 1] + f[j] * 8.0 + f[j + 1] * 5.0) * (h / 12.0)
        };
        out[j + 1] = out[j] + panel;
    }
    out
}

/// `theta(t) = 1 + 2 i e^{-a} int_0^t g sin(omega s) [Y+ - Y-] ds`.
pub fn survival_from_y(state: &VolterraState) -> Result<SurvivalTrace> {
    let cfg = &state.config;
    let (a, g, omega) = (cfg.a(), cfg.coupling(), cfg.omega);
    let q: Vec<C> = state
        .y_plus
        .iter()
        .enumerate()
        .map(|(j, &yp)| {
            let ym = state.y_minus.get(j).copied().unwrap_or(C::new(0.0, 0.0));
            (yp - ym) * (g * (omega * j as f64 * state.h).sin())
        })
        .collect();
    let coef = C::new(0.0, 2.0 * (-a).exp());
    let theta: Vec<C> = cumulative_integral(&q, state.h).into_iter().map(|v| 1.0 + coef * v).collect();
    SurvivalTrace::new(state.t_grid(), theta, Pipeline::Volterra, *cfg)
}

/// `|theta|^2` from the time-domain pipeline.
pub fn volterra_survival(config: &ModelConfig, t_max: f64, h: f64) -> Result<SurvivalTrace> {
    survival_from_y(&solve_volterra(config, t_max, h)?)
}

/// Step-halving study over `levels` runs at `h, h/2, ...`.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub steps: Vec<f64>,
    /// Largest `| |theta|^2_h - |theta|^2_{h/2} |` on the coarse grid, per pair.
    pub discrepancy: Vec<f64>,
    /// `log2` of successive discrepancy ratios.
    pub order: Vec<f64>,
    pub finest: SurvivalTrace,
}

/// Run `levels >= 2` halvings; fails if the last discrepancy exceeds `tol`.
pub fn step_halving(config: &ModelConfig, t_max: f64, h: f64, levels: usize, tol: f64) -> Result<Refinement> {
    if levels < 2 {
        return Err(Error::domain("step halving needs at least two levels"));
    }
    let mut traces = Vec::with_capacity(levels);
    let mut steps = Vec::with_capacity(levels);
    for l in 0..levels {
        let hl = h / (1u64 << l) as f64;
        steps.push(hl);
        traces.push(volterra_survival(config, t_max, hl)?);
    }
    let coarse = traces[0].len();
    let discrepancy: Vec<f64> = traces
        .windows(2)
        .enumerate()
        .map(|(l, w)| {
            let stride = 1usize << l;
            let fine_stride = stride * 2;
            (0..coarse)
                .map(|i| (w[0].theta[i * stride].norm_sqr() - w[1].theta[i * fine_stride].norm_sqr()).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let order: Vec<f64> = discrepancy.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
    let last = *discrepancy.last().unwrap();
    if !(last <= tol) {
        return Err(Error::Refinement { order: order.last().copied().unwrap_or(f64::NAN), discrepancy: last });
    }
    Ok(Refinement { steps, discrepancy, order, finest: traces.pop().unwrap() })
}
