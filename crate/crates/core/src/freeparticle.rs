//! Trapping of an initially free packet by the oscillating pair
//! `2 r sin(omega t) [delta(x + a) - delta(x - a)]`.
//!
//! The amplitudes at the sites obey the same two-site Volterra system as the
//! bound problem, with the free kernels `2i G(0, t)` and `2i G(2a, t)`,
//! `G(d, t) = (4 pi i t)^{-1/2} e^{i d^2 / 4t}`, and the free packet at the
//! sites as forcing. The wave function anywhere then follows from
//!
//! ```text
//! psi(x, t) = psi0(x, t) + int_0^t eta(s) [2i G(x - a, t - s) psi(a, s) - 2i G(x + a, t - s) psi(-a, s)] ds
//! ```
//!
//! evaluated for all `t` at once by FFT convolution.

use std::f64::consts::PI;

use errorfunctions::RealErrorFunctions;
use num_complex::Complex64 as C;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fit::line_fit;
use crate::floquet::StabilizationPoint;
use crate::model::{ModelConfig, Potential};
use crate::quad::integrate_breaks;
use crate::timedomain::{kernel_weights, march, KernelKind};

/// Initial momentum-space amplitude `F(k)`, `psi(x, 0) = int F(k) e^{ikx} dk / sqrt(2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PacketKind {
    /// `psi(x, 0) = (2 pi w^2)^{-1/4} exp(-(x - x0)^2 / 4w^2 + i k0 x)`.
    Gaussian { center: f64, width: f64, momentum: f64 },
    /// `F` sampled on an ascending uniform `k` grid, linear in between.
    Custom { k: Vec<f64>, f: Vec<C> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub kind: PacketKind,
    /// `int |F|^2 dk`.
    pub norm: f64,
}

const NORM_TOL: f64 = 1e-8;

impl WavePacket {
    pub fn gaussian(center: f64, width: f64, momentum: f64) -> Result<Self> {
        if !(width > 0.0 && center.is_finite() && momentum.is_finite()) {
            return Err(Error::domain("gaussian packet needs width > 0 and finite center, momentum"));
        }
        Ok(WavePacket { kind: PacketKind::Gaussian { center, width, momentum }, norm: 1.0 })
    }

    /// Unit width at the origin, at rest.
    pub fn standard() -> Self {
        WavePacket { kind: PacketKind::Gaussian { center: 0.0, width: 1.0, momentum: 0.0 }, norm: 1.0 }
    }

    /// Sampled packet; rejects one whose norm is off by more than 1e-8.
    pub fn custom(k: Vec<f64>, f: Vec<C>) -> Result<Self> {
        if k.len() != f.len() || k.len() < 3 {
            return Err(Error::domain("custom packet needs matching samples, at least three"));
        }
        let dk = k[1] - k[0];
        if !(dk > 0.0) || k.windows(2).any(|w| ((w[1] - w[0]) - dk).abs() > 1e-9 * dk) {
            return Err(Error::domain("custom packet needs a uniform ascending k grid"));
        }
        let norm = linear_norm(&f, dk);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("packet norm {norm} is not 1 (use WavePacket::normalized)")));
        }
        Ok(WavePacket { kind: PacketKind::Custom { k, f }, norm })
    }

    /// Rescales samples to unit norm first.
    pub fn normalized(k: Vec<f64>, mut f: Vec<C>) -> Result<Self> {
        if k.len() < 2 || k.len() != f.len() {
            return Err(Error::domain("custom packet needs matching samples"));
        }
        let n = linear_norm(&f, k[1] - k[0]);
        if !(n > 0.0) {
            return Err(Error::domain("packet is zero"));
        }
        f.iter_mut().for_each(|v| *v /= n.sqrt());
        Self::custom(k, f)
    }

    pub fn amplitude(&self, k: f64) -> C {
        match &self.kind {
            PacketKind::Gaussian { center, width, momentum } => {
                let q = k - momentum;
                (2.0 * width * width / PI).powf(0.25) * (-width * width * q * q).exp() * C::from_polar(1.0, -q * center)
            }
            PacketKind::Custom { k: ks, f } => {
                let dk = ks[1] - ks[0];
                let u = (k - ks[0]) / dk;
                if u < 0.0 || u > (ks.len() - 1) as f64 {
                    return C::new(0.0, 0.0);
                }
                let i = (u.floor() as usize).min(ks.len() - 2);
                let s = u - i as f64;
                f[i] * (1.0 - s) + f[i + 1] * s
            }
        }
    }

    /// `k` interval carrying the packet (Gaussian: 9 standard deviations).
    fn k_support(&self) -> (f64, f64) {
        match &self.kind {
            PacketKind::Gaussian { width, momentum, .. } => (momentum - 9.0 / width, momentum + 9.0 / width),
            PacketKind::Custom { k, .. } => (k[0], k[k.len() - 1]),
        }
    }
}

/// `int |f|^2` for `f` linear between samples.
fn linear_norm(f: &[C], dk: f64) -> f64 {
    f.windows(2).map(|w| (w[0].norm_sqr() + w[1].norm_sqr() + (w[0] * w[1].conj()).re) / 3.0 * dk).sum()
}

/// Free evolution `psi0(x, t) = int F(k) e^{ikx - ik^2 t} dk / sqrt(2 pi)`,
/// in closed form for the Gaussian.
pub fn free_evolve(packet: &WavePacket, x: f64, t: f64) -> Result<C> {
    if !(t >= 0.0) {
        return Err(Error::domain("t must be >= 0"));
    }
    match packet.kind {
        PacketKind::Gaussian { center, width, momentum } => {
            let w2 = width * width;
            let sigma = C::new(w2, t);
            let y = x - center - 2.0 * momentum * t;
            let pre = (2.0 * PI * w2).powf(-0.25) * (C::new(w2, 0.0) / sigma).sqrt();
            Ok(pre * (-(y * y) / (sigma * 4.0) + C::new(0.0, momentum * x - momentum * momentum * t)).exp())
        }
        PacketKind::Custom { .. } => free_evolve_quadrature(packet, x, t),
    }
}

/// The momentum integral by adaptive quadrature, for any packet.
pub fn free_evolve_quadrature(packet: &WavePacket, x: f64, t: f64) -> Result<C> {
    let (lo, hi) = packet.k_support();
    // panels a fraction of the local phase period apart to start with
    let phase_rate = x.abs() + 2.0 * t * lo.abs().max(hi.abs());
    let n0 = ((hi - lo) * phase_rate / (2.0 * PI)).ceil().clamp(8.0, 20000.0) as usize;
    let mut breaks: Vec<f64> = (0..=n0).map(|i| lo + (hi - lo) * i as f64 / n0 as f64).collect();
    if let PacketKind::Custom { k, .. } = &packet.kind {
        breaks = k.clone();
    }
    let mut f = |k: f64| -> Result<C> { Ok(packet.amplitude(k) * C::from_polar(1.0, k * x - k * k * t)) };
    let q = integrate_breaks(&mut f, &breaks, 1e-14, 1e-11, breaks.len() * 8 + 4000)?;
    Ok(q.value / (2.0 * PI).sqrt())
}

/// Probability in `|x| <= l` under free evolution; closed form for the Gaussian.
pub fn free_localization(packet: &WavePacket, l: f64, t: f64) -> Result<f64> {
    match packet.kind {
        PacketKind::Gaussian { center, width, momentum } => {
            let w = ((width.powi(4) + t * t) / (width * width)).sqrt();
            let c = center + 2.0 * momentum * t;
            let s = std::f64::consts::SQRT_2 * w;
            Ok(0.5 * (RealErrorFunctions::erf((l - c) / s) + RealErrorFunctions::erf((l + c) / s)))
        }
        PacketKind::Custom { .. } => {
            let n = 400;
            let dx = 2.0 * l / n as f64;
            let vals: Vec<f64> =
                (0..=n).into_par_iter().map(|i| free_evolve(packet, -l + dx * i as f64, t).map(|z| z.norm_sqr())).collect::<Result<_>>()?;
            Ok(simpson(&vals, dx))
        }
    }
}

/// All `(N, g0)` with `g0 = -(pi N / a)^2` in `(-omega, 0)`.
pub fn trap_candidates(a: f64, omega: f64) -> Vec<(u32, f64)> {
    if !(a > 0.0 && omega > 0.0) {
        return Vec::new();
    }
    (1u32..)
        .map(|n| (n, -(PI * n as f64 / a).powi(2)))
        .take_while(|&(_, g0)| g0 > -omega)
        .collect()
}

/// The free-pair configuration at a manifold point.
pub fn trapping_config(point: &StabilizationPoint) -> Result<ModelConfig> {
    ModelConfig::free_trap(point.a, point.r_s, point.omega)
}

#[derive(Debug, Clone, Copy)]
pub struct TrapOptions {
    /// Steps per drive period (at least 40).
    pub steps_per_period: usize,
    /// Half-width `L` of the localization window; `None` gives `2a + 5`.
    pub window: Option<f64>,
    /// Target spatial step; the grid puts nodes on `+-a`.
    pub dx: f64,
    /// Keep every `stride`-th step in the trace.
    pub stride: usize,
    /// Keep `psi(x, t)` on the grid for `t >= keep_from`.
    pub keep_from: Option<f64>,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions { steps_per_period: 80, window: None, dx: 0.1, stride: 4, keep_from: None }
    }
}

/// Localization probability in `|x| <= window` and the site amplitudes.
#[derive(Debug, Clone)]
pub struct LocalizationTrace {
    pub config: ModelConfig,
    pub window: f64,
    pub t: Vec<f64>,
    pub probability: Vec<f64>,
    /// `psi(a, t)` and `psi(-a, t)` on the sampled times.
    pub psi_plus: Vec<C>,
    pub psi_minus: Vec<C>,
    pub x: Vec<f64>,
    /// `(t, psi(x, t))` for the kept late samples.
    pub kept: Vec<(f64, Vec<C>)>,
}

impl LocalizationTrace {
    /// Mean probability over the last `periods` drive periods.
    pub fn floor(&self, periods: f64) -> f64 {
        let t_end = *self.t.last().unwrap();
        let lo = t_end - periods * self.config.period();
        let sel: Vec<f64> = self.t.iter().zip(&self.probability).filter(|(t, _)| **t >= lo).map(|(_, p)| *p).collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    }

    fn at(&self, t: f64) -> f64 {
        let i = self.t.partition_point(|&v| v <= t).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        self.probability[i - 1] + (self.probability[i] - self.probability[i - 1]) * (t - t0) / (t1 - t0)
    }

    /// Largest Pearson correlation between the trace on `[t0, t0 + W]` and on
    /// the same window moved by `W + m P`, `|m| <= 2`, with `W` the largest
    /// whole number of periods that fits twice after `t0`.
    pub fn quasiperiodicity(&self, t0: f64) -> Result<f64> {
        let period = self.config.period();
        let t_end = *self.t.last().unwrap();
        let whole = ((t_end - t0) / period / 2.0).floor() - 2.0;
        if whole < 3.0 {
            return Err(Error::domain("trace too short for the quasiperiodicity test"));
        }
        let w = whole * period;
        let n = 2000;
        let a: Vec<f64> = (0..n).map(|i| self.at(t0 + w * i as f64 / (n - 1) as f64)).collect();
        let mut best = f64::NEG_INFINITY;
        for m in -2i32..=2 {
            let lag = w + m as f64 * period;
            if t0 + lag < t0 + w * 0.5 || t0 + lag + w > t_end {
                continue;
            }
            let b: Vec<f64> = (0..n).map(|i| self.at(t0 + lag + w * i as f64 / (n - 1) as f64)).collect();
            best = best.max(pearson(&a, &b));
        }
        Ok(best)
    }

    /// Amplitude of the `e^{i nu t}` component of the kept `psi(x, t)`.
    pub fn harmonic_profile(&self, nu: f64) -> Result<Vec<f64>> {
        if self.kept.len() < 2 {
            return Err(Error::domain("no kept wave-function samples"));
        }
        let nx = self.x.len();
        let mut acc = vec![C::new(0.0, 0.0); nx];
        for (t, psi) in &self.kept {
            let ph = C::from_polar(1.0, -nu * t);
            for (s, p) in acc.iter_mut().zip(psi) {
                *s += p * ph;
            }
        }
        Ok(acc.iter().map(|s| s.norm() / self.kept.len() as f64).collect())
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Composite Simpson on a uniform grid; a 3/8 panel closes an odd count.
fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    match n {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        2 => h / 3.0 * (f[0] + 4.0 * f[1] + f[2]),
        _ => {
            let even = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut s = 0.0;
            for i in (0..even).step_by(2) {
                s += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
            }
            if even < n {
                let i = even;
                s += 3.0 * h / 8.0 * (f[i] + 3.0 * f[i + 1] + 3.0 * f[i + 2] + f[i + 3]);
            }
            s
        }
    }
}

/// Evolve `packet` under the free pair of `config` to `t_max`.
pub fn trapped_evolution(config: &ModelConfig, packet: &WavePacket, t_max: f64, opts: &TrapOptions) -> Result<LocalizationTrace> {
    config.validate()?;
    let a = match config.potential {
        Potential::FreeTrap { a } if a > 0.0 => a,
        _ => return Err(Error::domain("trapped evolution needs the free pair with a > 0")),
    };
    if !(t_max > 0.0) || opts.steps_per_period < 40 || opts.stride == 0 || !(opts.dx > 0.0) {
        return Err(Error::domain("need t_max > 0, steps_per_period >= 40, stride >= 1, dx > 0"));
    }
    let omega = config.omega;
    let h = config.period() / opts.steps_per_period as f64;
    let n = (t_max / h).ceil() as usize;
    let r = config.r;
    let eta = |t: f64| C::new(r * (omega * t).sin(), 0.0);

    // spatial grid: spacing divides a, window rounded up to the grid
    let m = (a / opts.dx).ceil() as usize;
    let dx = a / m as f64;
    let l_req = opts.window.unwrap_or(2.0 * a + 5.0);
    if !(l_req > a) {
        return Err(Error::domain("the window must contain both sites"));
    }
    let nl = (l_req / dx).ceil() as usize;
    let l = nl as f64 * dx;
    let x: Vec<f64> = (0..=2 * nl).map(|i| (i as f64 - nl as f64) * dx).collect();

    let source = |j: usize| -> [C; 2] {
        let t = j as f64 * h;
        [free_evolve(packet, a, t).unwrap_or(C::new(f64::NAN, 0.0)), free_evolve(packet, -a, t).unwrap_or(C::new(f64::NAN, 0.0))]
    };
    let same = kernel_weights(0.0, KernelKind::FreeSame, h, n)?;
    let cross = kernel_weights(a, KernelKind::FreeCross, h, n)?;
    let (yp, ym) = march(n, h, &source, &eta, &same, Some(&cross))?;
    drop((same, cross));

    let samples: Vec<usize> = (0..=n).step_by(opts.stride).collect();
    let t: Vec<f64> = samples.iter().map(|&j| j as f64 * h).collect();

    // phi = eta psi at each site, zero-padded for linear convolution
    let len = (2 * (n + 1)).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let spectrum = |v: &[C]| -> Vec<C> {
        let mut buf = vec![C::new(0.0, 0.0); len];
        buf[..v.len()].copy_from_slice(v);
        fwd.process(&mut buf);
        buf
    };
    // phi_0 = 0 (sin 0 = 0), so the endpoint weights never enter
    let phi_p: Vec<C> = yp.iter().enumerate().map(|(j, y)| if j == 0 { C::new(0.0, 0.0) } else { eta(j as f64 * h) * y }).collect();
    let phi_m: Vec<C> = ym.iter().enumerate().map(|(j, y)| if j == 0 { C::new(0.0, 0.0) } else { eta(j as f64 * h) * y }).collect();
    let fp = spectrum(&phi_p);
    let fm = spectrum(&phi_m);

    // distances |x -+ a| are multiples of dx up to l + a
    let n_dist = nl + m + 1;
    let conv: Vec<(Vec<C>, Vec<C>)> = if r == 0.0 {
        vec![(vec![C::new(0.0, 0.0); samples.len()], vec![C::new(0.0, 0.0); samples.len()]); n_dist]
    } else {
        (0..n_dist)
            .map(|k| -> Result<(Vec<C>, Vec<C>)> {
                let half = 0.5 * k as f64 * dx;
                let w = kernel_weights(half, KernelKind::FreeCross, h, n)?;
                let fw = spectrum(&w.interior[..=n]);
                let mut out = Vec::with_capacity(2);
                for f in [&fp, &fm] {
                    let mut buf: Vec<C> = fw.iter().zip(f.iter()).map(|(a, b)| a * b).collect();
                    inv.process(&mut buf);
                    out.push(samples.iter().map(|&j| buf[j] / len as f64).collect::<Vec<C>>());
                }
                let mm = out.pop().unwrap();
                Ok((out.pop().unwrap(), mm))
            })
            .collect::<Result<_>>()?
    };

    let keep_from = opts.keep_from.unwrap_or(f64::INFINITY);
    let rows: Vec<(f64, Option<Vec<C>>)> = samples
        .par_iter()
        .enumerate()
        .map(|(s, &j)| -> Result<(f64, Option<Vec<C>>)> {
            let tj = j as f64 * h;
            let psi: Vec<C> = x
                .iter()
                .enumerate()
                .map(|(i, &xv)| -> Result<C> {
                    let kp = (i as i64 - (nl + m) as i64).unsigned_abs() as usize;
                    let km = (i as i64 - (nl as i64 - m as i64)).unsigned_abs() as usize;
                    Ok(free_evolve(packet, xv, tj)? + conv[kp].0[s] - conv[km].1[s])
                })
                .collect::<Result<_>>()?;
            let dens: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
            // Simpson per smooth piece: [-l, -a], [-a, a], [a, l]
            let (i1, i2) = (nl - m, nl + m);
            let p = simpson(&dens[..=i1], dx) + simpson(&dens[i1..=i2], dx) + simpson(&dens[i2..], dx);
            Ok((p, (tj >= keep_from).then_some(psi)))
        })
        .collect::<Result<_>>()?;
    let probability: Vec<f64> = rows.iter().map(|r| r.0).collect();
    if probability.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("localization probability"));
    }
    let kept: Vec<(f64, Vec<C>)> = rows.into_iter().zip(&t).filter_map(|(r, &tj)| r.1.map(|p| (tj, p))).collect();
    Ok(LocalizationTrace {
        config: *config,
        window: l,
        t,
        probability,
        psi_plus: samples.iter().map(|&j| yp[j]).collect(),
        psi_minus: samples.iter().map(|&j| ym[j]).collect(),
        x,
        kept,
    })
}

/// Log-log slope of the free localization probability over `[t1, t2]`.
pub fn free_decay_exponent(packet: &WavePacket, l: f64, t1: f64, t2: f64) -> Result<f64> {
    let ts: Vec<f64> = (0..=40).map(|i| t1 * (t2 / t1).powf(i as f64 / 40.0)).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| free_localization(packet, l, t).map(|p| p.log10())).collect::<Result<_>>()?;
    let xs: Vec<f64> = ts.iter().map(|t| t.log10()).collect();
    Ok(line_fit(&xs, &ys)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates() {
        let c = trap_candidates(4.0, 1.5);
        assert_eq!(c.len(), 1);
        assert!((c[0].1 + (PI / 4.0).powi(2)).abs() < 1e-15);
        assert!(trap_candidates(1.0, 1.0).is_empty());
        let c = trap_candidates(7.0, 1.5);
        assert_eq!(c.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2]);
        for (n, _) in c {
            assert!(7.0 > PI * n as f64 / 1.5f64.sqrt());
        }
    }

    #[test]
    fn gaussian_at_zero_time_and_by_quadrature() {
        let p = WavePacket::gaussian(0.5, 1.3, 0.7).unwrap();
        for x in [-2.0, 0.0, 0.4, 3.1] {
            let direct = (2.0 * PI * 1.69f64).powf(-0.25) * (C::new(-(x - 0.5f64).powi(2) / (4.0 * 1.69), 0.7 * x)).exp();
            assert!((free_evolve(&p, x, 0.0).unwrap() - direct).norm() < 1e-12);
            for t in [0.0, 3.0, 40.0] {
                let a = free_evolve(&p, x, t).unwrap();
                let b = free_evolve_quadrature(&p, x, t).unwrap();
                assert!((a - b).norm() < 1e-8, "x {x} t {t}: {a} {b}");
            }
        }
    }

    #[test]
    fn custom_packet_norm_is_checked() {
        let k: Vec<f64> = (0..=400).map(|i| -8.0 + 0.04 * i as f64).collect();
        let g = WavePacket::standard();
        let f: Vec<C> = k.iter().map(|&v| g.amplitude(v)).collect();
        let p = WavePacket::normalized(k.clone(), f.clone()).unwrap();
        assert!((p.norm - 1.0).abs() < 1e-8);
        let doubled: Vec<C> = f.iter().map(|v| v * 2.0).collect();
        assert!(WavePacket::custom(k, doubled).is_err());
        let a = free_evolve(&p, 0.3, 2.0).unwrap();
        let b = free_evolve(&g, 0.3, 2.0).unwrap();
        assert!((a - b).norm() < 1e-3);
    }

    #[test]
    fn free_spreading_law() {
        let p = WavePacket::standard();
        let slope = free_decay_exponent(&p, 13.0, 200.0, 1000.0).unwrap();
        assert!((slope + 1.0).abs() < 0.01, "{slope}");
        // |psi0(0, t)|^2 ~ 1/t
        let r = free_evolve(&p, 0.0, 1e4).unwrap().norm_sqr() / free_evolve(&p, 0.0, 1e5).unwrap().norm_sqr();
        assert!((r - 10.0).abs() < 1e-3);
        // localization in |x| < 5 at t = 100 by quadrature of the density
        let n = 2000;
        let dens: Vec<f64> = (0..=n).map(|i| free_evolve(&p, -5.0 + 10.0 * i as f64 / n as f64, 100.0).unwrap().norm_sqr()).collect();
        assert!((simpson(&dens, 10.0 / n as f64) - free_localization(&p, 5.0, 100.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn undriven_pair_is_free_evolution() {
        let cfg = ModelConfig::free_trap(4.0, 0.0, 1.5).unwrap();
        let p = WavePacket::standard();
        let tr = trapped_evolution(&cfg, &p, 30.0, &TrapOptions::default()).unwrap();
        for (t, pr) in tr.t.iter().zip(&tr.probability) {
            assert!((pr - free_localization(&p, tr.window, *t).unwrap()).abs() < 1e-8);
        }
    }
}
