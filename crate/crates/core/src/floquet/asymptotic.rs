//! Closed asymptotic forms of the survival amplitude: the pole plus cubic
//! tail off resonance, and the Gaussian-weighted integral at the one-photon
//! resonance.
//!
//! `lambda` and `sigma` are never taken from a formula; they are read off
//! poles located by [`find_pole`](super::pole::find_pole) via
//! `Re xi0 = -r^2 lambda sqrt(omega - 1 - Delta)` and `Delta = r^2 sigma`.

use num_complex::Complex64 as C;

use super::pole::{find_pole, PoleResult};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Potential};
use crate::quad::integrate_breaks;

/// `e^{xi0 t}` plus the cut term with the `[(omega - 1 - Delta) t + 1]^{-3/2}` factor.
pub fn theta_asymptotic(config: &ModelConfig, pole: &PoleResult, t: f64) -> Result<C> {
    if !pole.converged {
        return Err(Error::Resonance(format!(
            "pole {} is not isolated from the cut; use theta_resonance",
            pole.xi0
        )));
    }
    if t < 0.0 {
        return Err(Error::domain("t must be >= 0"));
    }
    let w = config.omega;
    let delta = pole.stark_shift;
    let detune = w - 1.0 - delta;
    if detune <= 0.0 {
        return Err(Error::domain("the off-resonance form needs omega > 1 + Delta"));
    }
    let head = (pole.xi0 * t).exp();
    let phase = C::from_polar(1.0, detune * t + std::f64::consts::FRAC_PI_4);
    let tail = phase * (w * pole.xi0.re)
        / (std::f64::consts::PI.sqrt() * (w * w - (1.0 + delta).powi(2)) * (detune * t + 1.0).powf(1.5));
    Ok(head + tail)
}

/// `(lambda, sigma)` at the configuration's frequency, from its pole.
pub fn lambda_sigma(config: &ModelConfig) -> Result<(f64, f64)> {
    let pole = find_pole(config, C::new(0.0, 0.0))?;
    let r2 = config.r * config.r;
    let detune = config.omega - 1.0 - pole.stark_shift;
    if r2 == 0.0 || detune <= 0.0 {
        return Err(Error::domain("lambda is defined for r != 0 and omega > 1 + Delta"));
    }
    Ok((-pole.xi0.re / (r2 * detune.sqrt()), pole.stark_shift / r2))
}

/// `(lambda(1), sigma(1))` for the single-site potential at depth `a`:
/// poles at `r = 0.01` on `omega in {1.05, 1.1, 1.15, 1.2}`, extrapolated to
/// `omega = 1` with a cubic.
pub fn lambda_sigma_at_threshold(a: f64) -> Result<(f64, f64)> {
    let r = 0.01;
    let ws = [1.05, 1.1, 1.15, 1.2];
    let mut ls = [0.0; 4];
    let mut ss = [0.0; 4];
    for (i, &w) in ws.iter().enumerate() {
        let (l, s) = lambda_sigma(&ModelConfig::u1(a, r, w)?)?;
        ls[i] = l;
        ss[i] = s;
    }
    Ok((lagrange_at(&ws, &ls, 1.0), lagrange_at(&ws, &ss, 1.0)))
}

fn lagrange_at(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..xs.len() {
        let mut w = 1.0;
        for j in 0..xs.len() {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        sum += w * ys[i];
    }
    sum
}

/// Parameters of the resonance integral.
#[derive(Debug, Clone, Copy)]
pub struct ResonanceParams {
    /// `r^4 lambda(1)^2`, the inverse time scale of the Gaussian factor.
    pub rate: f64,
    /// The O(1) shape parameter `h`, fitted (see [`fit_resonance_h`]).
    pub h: f64,
    /// Phase drift `epsilon`; only the phase of theta depends on it.
    pub epsilon: f64,
}

impl ResonanceParams {
    pub fn for_config(config: &ModelConfig, h: f64) -> Result<Self> {
        let a = match config.potential {
            Potential::U1 { a } => a,
            _ => return Err(Error::domain("the resonance form is derived for the single-site potential")),
        };
        let (lambda, _) = lambda_sigma_at_threshold(a)?;
        Ok(ResonanceParams { rate: config.r.powi(4) * lambda * lambda, h, epsilon: 0.0 })
    }
}

/// `(e^{i eps t + i pi/4} / pi) int e^{-t rate x^2 / 4} x^2 dx / ([x^2 - h]^2 + i x^2)`.
pub fn theta_resonance(params: &ResonanceParams, t: f64) -> Result<C> {
    if t < 0.0 {
        return Err(Error::domain("t must be >= 0"));
    }
    let ResonanceParams { rate, h, epsilon } = *params;
    let g = 0.25 * t * rate;
    // even integrand; x = u / (1 - u) maps [0, inf) onto [0, 1)
    let mut f = |u: f64| -> Result<C> {
        if u >= 1.0 {
            // x^2 dx/du / x^4 -> 1 as u -> 1, killed by the Gaussian when g > 0
            return Ok(C::new(if g > 0.0 { 0.0 } else { 1.0 }, 0.0));
        }
        let x = u / (1.0 - u);
        let jac = 1.0 / ((1.0 - u) * (1.0 - u));
        let x2 = x * x;
        let den = C::new((x2 - h) * (x2 - h), x2);
        Ok((-g * x2).exp() * x2 * jac / den)
    };
    let to_u = |x: f64| x / (1.0 + x);
    let mut breaks = vec![0.0];
    let mut marks = vec![];
    if h > 0.0 {
        marks.push(h.sqrt());
    }
    if g > 0.0 {
        marks.push(0.3 / g.sqrt());
        marks.push(3.0 / g.sqrt());
    }
    marks.sort_by(f64::total_cmp);
    for m in marks {
        let u = to_u(m);
        if u > *breaks.last().unwrap() + 1e-12 && u < 1.0 - 1e-12 {
            breaks.push(u);
        }
    }
    breaks.push(1.0);
    let q = integrate_breaks(&mut f, &breaks, 1e-14, 1e-10, 4000)?;
    let phase = C::from_polar(1.0, epsilon * t + std::f64::consts::FRAC_PI_4);
    Ok(phase * q.value * (2.0 / std::f64::consts::PI))
}

/// Least-squares `h` on `[h_lo, h_hi]` matching `log |theta_resonance|^2` to
/// reference survival samples (golden-section search on the log misfit).
pub fn fit_resonance_h(rate: f64, ts: &[f64], survival: &[f64], h_lo: f64, h_hi: f64) -> Result<(f64, f64)> {
    if ts.len() != survival.len() || ts.is_empty() {
        return Err(Error::domain("fit needs matching, non-empty samples"));
    }
    let misfit = |h: f64| -> Result<f64> {
        let p = ResonanceParams { rate, h, epsilon: 0.0 };
        let mut s = 0.0;
        for (&t, &y) in ts.iter().zip(survival) {
            let m = theta_resonance(&p, t)?.norm_sqr();
            s += (m.log10() - y.log10()).powi(2);
        }
        Ok((s / ts.len() as f64).sqrt())
    };
    // coarse scan, then golden section around the best cell
    let n = 40;
    let step = (h_hi - h_lo) / n as f64;
    let mut best = (f64::INFINITY, h_lo);
    for i in 0..=n {
        let h = h_lo + step * i as f64;
        let m = misfit(h)?;
        if m < best.0 {
            best = (m, h);
        }
    }
    let (mut lo, mut hi) = ((best.1 - step).max(h_lo), (best.1 + step).min(h_hi));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - gr * (hi - lo);
    let mut x2 = lo + gr * (hi - lo);
    let (mut f1, mut f2) = (misfit(x1)?, misfit(x2)?);
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = misfit(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = misfit(x2)?;
        }
    }
    let h = 0.5 * (lo + hi);
    Ok((h, misfit(h)?))
}
