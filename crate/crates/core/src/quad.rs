//! Quadrature rules: adaptive Gauss-Kronrod (7/15) for complex integrands and
//! Gauss-Legendre nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (integral, error estimate).
pub fn gk15(f: &mut dyn FnMut(f64) -> Result<C>, a: f64, b: f64) -> Result<(C, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x)?;
        let f2 = f(c + x)?;
        kron += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
    }
    let val = kron * h;
    let err = ((kron - gauss) * h).norm();
    Ok((val, err))
}

struct Panel {
    a: f64,
    b: f64,
    val: C,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: C,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive integration over `[a, b]` to `max(abs_tol, rel_tol |I|)`.
pub fn integrate(
    f: &mut dyn FnMut(f64) -> Result<C>,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], abs_tol, rel_tol, max_panels)
}

/// As [`integrate`], with the initial panels split at `breaks` (ascending).
pub fn integrate_breaks(
    f: &mut dyn FnMut(f64) -> Result<C>,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_panels: usize,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = C::new(0.0, 0.0);
    let mut err = 0.0;
    for w in breaks.windows(2) {
        let (val, e) = gk15(f, w[0], w[1])?;
        total += val;
        err += e;
        heap.push(Panel { a: w[0], b: w[1], val, err: e });
    }
    while err > abs_tol.max(rel_tol * total.norm()) {
        if heap.len() >= max_panels {
            return Err(Error::Quadrature { what: "adaptive Gauss-Kronrod".into(), achieved: err, requested: abs_tol.max(rel_tol * total.norm()) });
        }
        let worst = heap.pop().expect("non-empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::Quadrature { what: "panel underflow".into(), achieved: err, requested: abs_tol });
        }
        let (v1, e1) = gk15(f, worst.a, m)?;
        let (v2, e2) = gk15(f, m, worst.b)?;
        heap.push(Panel { a: worst.a, b: m, val: v1, err: e1 });
        heap.push(Panel { a: m, b: worst.b, val: v2, err: e2 });
        // re-sum rather than update: an infinite estimate must not poison the total
        total = heap.iter().map(|p| p.val).sum();
        err = heap.iter().map(|p| p.err).sum();
    }
    if !(err.is_finite() && total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::NonFinite("adaptive Gauss-Kronrod"));
    }
    // re-sum in a fixed order to shed the running-sum rounding
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = pairwise_sum(&panels.iter().map(|p| p.val).collect::<Vec<_>>());
    let error = panels.iter().map(|p| p.err).sum();
    Ok(QuadResult { value, error, panels: panels.len() })
}

/// Pairwise summation; deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[C]) -> C {
    if xs.len() <= 32 {
        return xs.iter().fold(C::new(0.0, 0.0), |s, &x| s + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_on_oscillatory_integrand() {
        let mut f = |x: f64| Ok(C::new(0.0, 10.0 * x).exp());
        let r = integrate(&mut f, 0.0, 3.0, 1e-13, 1e-13, 1000).unwrap();
        let exact = (C::new(0.0, 30.0).exp() - 1.0) / C::new(0.0, 10.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn gk_reports_failure() {
        let mut f = |x: f64| Ok(C::new(1.0 / x.abs().sqrt().max(1e-300), 0.0));
        assert!(integrate(&mut f, -1.0, 1.0, 1e-14, 0.0, 8).is_err());
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }
}
