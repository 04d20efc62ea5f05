//! Measured decay laws: exponential windows, power-law tails and scaling
//! exponents, as least-squares lines in log coordinates.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    ExponentialWindow,
    PowerLawTail,
    GammaVsR,
}

impl FitKind {
    pub fn label(self) -> &'static str {
        match self {
            FitKind::ExponentialWindow => "exponential_window",
            FitKind::PowerLawTail => "power_law_tail",
            FitKind::GammaVsR => "gamma_vs_r",
        }
    }
}

/// A straight-line fit. For an exponential window the line is `ln |theta|^2`
/// against `t`, so `slope = -Gamma`; for the other kinds it is log-log.
/// `residual` is the RMS deviation in log10 units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub kind: FitKind,
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub verdict: bool,
}

/// When a window counts as exponential decay.
///
/// The RMS bound and the three-period minimum are the primary rule. On its
/// own it is met by any smooth curve over a short enough span, so a window
/// must also fall by at least `min_efolds`, by `snr` times its RMS, and its
/// two halves must give slopes within `half_slope_tol` of each other. A
/// `t^-3` tail falling by one e-fold has halves about 17% apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowCriteria {
    pub rms_max: f64,
    pub min_periods: f64,
    pub min_efolds: f64,
    pub snr: f64,
    pub half_slope_tol: f64,
    /// Resampling points per window.
    pub samples: usize,
}

impl Default for WindowCriteria {
    fn default() -> Self {
        WindowCriteria { rms_max: 0.05, min_periods: 3.0, min_efolds: 1.0, snr: 10.0, half_slope_tol: 0.1, samples: 64 }
    }
}

/// Least squares `y = slope x + intercept`; returns `(slope, intercept, rms)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain("a line fit needs at least two matching points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("a line fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, intercept, rms))
}

fn check_samples(t: &[f64], s: &[f64]) -> Result<()> {
    if t.len() != s.len() || t.len() < 2 {
        return Err(Error::domain("samples must be matching and at least two long"));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("t must be strictly ascending"));
    }
    if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain("survival samples must be positive and finite"));
    }
    Ok(())
}

/// `ln s` at `x`, linear between samples (`x` inside the data).
fn ln_interp(t: &[f64], ln_s: &[f64], x: f64) -> f64 {
    let i = t.partition_point(|&v| v <= x).clamp(1, t.len() - 1);
    let (t0, t1) = (t[i - 1], t[i]);
    ln_s[i - 1] + (ln_s[i] - ln_s[i - 1]) * (x - t0) / (t1 - t0)
}

/// Judge one window `[t1, t2]` of `|theta|^2` samples against `criteria`.
pub fn exponential_window(t: &[f64], s: &[f64], omega: f64, window: (f64, f64), criteria: &WindowCriteria) -> Result<FitReport> {
    check_samples(t, s)?;
    let ln_s: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    window_fit(t, &ln_s, omega, window, criteria)
}

fn window_fit(t: &[f64], ln_s: &[f64], omega: f64, (t1, t2): (f64, f64), c: &WindowCriteria) -> Result<FitReport> {
    if !(t1 >= t[0] && t2 <= t[t.len() - 1] && t2 > t1) {
        return Err(Error::FitWindow { lo: t1, hi: t2, data_lo: t[0], data_hi: t[t.len() - 1] });
    }
    let n = c.samples.max(8);
    let xs: Vec<f64> = (0..n).map(|i| t1 + (t2 - t1) * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| ln_interp(t, ln_s, x)).collect();
    let (slope, intercept, rms_ln) = line_fit(&xs, &ys)?;
    let residual = rms_ln / std::f64::consts::LN_10;
    let len = t2 - t1;
    let drop = -slope * len;
    let h = n / 2;
    let (s1, _, _) = line_fit(&xs[..h], &ys[..h])?;
    let (s2, _, _) = line_fit(&xs[h..], &ys[h..])?;
    let verdict = residual < c.rms_max
        && len * omega >= c.min_periods * 2.0 * std::f64::consts::PI * (1.0 - 1e-12)
        && drop >= c.min_efolds
        && drop >= c.snr * rms_ln
        && (s1 - s2).abs() <= c.half_slope_tol * slope.abs();
    Ok(FitReport { kind: FitKind::ExponentialWindow, window: (t1, t2), slope, intercept, residual, verdict })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScan {
    pub tested: usize,
    pub passing: usize,
    /// First passing window; failing that, the smallest residual among the
    /// windows that fall far enough, or among all windows if none does.
    pub best: Option<FitReport>,
}

impl WindowScan {
    pub fn found(&self) -> bool {
        self.passing > 0
    }
}

/// Scan windows of `3, 3.75, ...` periods (ratio 1.25) starting every
/// `max(L/8, t/10, period/2)`, over the whole trace.
pub fn scan_exponential_windows(t: &[f64], s: &[f64], omega: f64, criteria: &WindowCriteria) -> Result<WindowScan> {
    check_samples(t, s)?;
    if !(omega > 0.0) {
        return Err(Error::domain("omega must be > 0"));
    }
    let ln_s: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let period = 2.0 * std::f64::consts::PI / omega;
    let (lo, hi) = (t[0], t[t.len() - 1]);
    let mut scan = WindowScan { tested: 0, passing: 0, best: None };
    let mut len = criteria.min_periods * period;
    while len <= hi - lo {
        let mut t0 = lo;
        while t0 + len <= hi {
            let fit = window_fit(t, &ln_s, omega, (t0, t0 + len), criteria)?;
            scan.tested += 1;
            if fit.verdict {
                if scan.passing == 0 {
                    scan.best = Some(fit);
                }
                scan.passing += 1;
            } else if scan.passing == 0 && scan.best.is_none_or(|b| closer(&fit, &b, criteria.min_efolds)) {
                scan.best = Some(fit);
            }
            t0 += (len / 8.0).max(0.1 * t0).max(0.5 * period);
        }
        len *= 1.25;
    }
    Ok(scan)
}

fn closer(a: &FitReport, b: &FitReport, min_efolds: f64) -> bool {
    let falls = |f: &FitReport| -f.slope * (f.window.1 - f.window.0) >= min_efolds;
    match (falls(a), falls(b)) {
        (true, false) => true,
        (false, true) => false,
        _ => a.residual < b.residual,
    }
}

/// Log-log slope of `|theta|^2` over `[t1, t2]`, from the samples inside.
pub fn power_law_tail(t: &[f64], s: &[f64], window: (f64, f64)) -> Result<FitReport> {
    check_samples(t, s)?;
    let (t1, t2) = window;
    if !(t1 > 0.0 && t1 >= t[0] && t2 <= t[t.len() - 1] && t2 > t1) {
        return Err(Error::FitWindow { lo: t1, hi: t2, data_lo: t[0], data_hi: t[t.len() - 1] });
    }
    let (x, y): (Vec<f64>, Vec<f64>) =
        t.iter().zip(s).filter(|(tv, _)| **tv >= t1 && **tv <= t2).map(|(tv, sv)| (tv.log10(), sv.log10())).unzip();
    let (slope, intercept, residual) = line_fit(&x, &y)?;
    Ok(FitReport { kind: FitKind::PowerLawTail, window, slope, intercept, residual, verdict: true })
}

/// Exponent `q` of `gamma ~ r^q`.
pub fn gamma_vs_r(r: &[f64], gamma: &[f64]) -> Result<FitReport> {
    check_samples(r, gamma)?;
    let x: Vec<f64> = r.iter().map(|v| v.log10()).collect();
    let y: Vec<f64> = gamma.iter().map(|v| v.log10()).collect();
    let (slope, intercept, residual) = line_fit(&x, &y)?;
    Ok(FitReport { kind: FitKind::GammaVsR, window: (r[0], r[r.len() - 1]), slope, intercept, residual, verdict: true })
}

/// Spectral peaks of uniformly sampled `values` after removing their
/// least-squares line (Hann window), as angular frequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RippleSpectrum {
    /// The strongest peak.
    pub dominant: f64,
    /// The lowest peak reaching `threshold` times the strongest; the
    /// repetition frequency of the ripple pattern.
    pub fundamental: f64,
    pub bin: f64,
}

pub fn ripple_spectrum(dt: f64, values: &[f64], threshold: f64) -> Result<RippleSpectrum> {
    let n = values.len();
    if n < 16 || !(dt > 0.0) {
        return Err(Error::domain("spectral peaks need at least 16 samples and dt > 0"));
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let (slope, intercept, _) = line_fit(&x, values)?;
    let mut buf: Vec<num_complex::Complex64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
            num_complex::Complex64::new((v - slope * i as f64 - intercept) * w, 0.0)
        })
        .collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let amp: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm()).collect();
    let bin = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    // the lowest bins hold what is left of the trend
    let peaks: Vec<usize> = (3..amp.len() - 1).filter(|&k| amp[k] >= amp[k - 1] && amp[k] > amp[k + 1]).collect();
    let Some(&top) = peaks.iter().max_by(|&&a, &&b| amp[a].total_cmp(&amp[b])) else {
        return Err(Error::domain("no spectral peak"));
    };
    let low = peaks.iter().copied().find(|&k| amp[k] >= threshold * amp[top]).unwrap_or(top);
    Ok(RippleSpectrum { dominant: top as f64 * bin, fundamental: low as f64 * bin, bin })
}
