//! End-to-end behaviour of the bound-state pipelines.

use floquet_decay::floquet::{find_pole, invert_survival, stabilization_search, stabilizing_frequency, theta_asymptotic, Decomposition, InversionOptions};
use floquet_decay::timedomain::volterra_survival;
use floquet_decay::trace::max_relative_gap;
use floquet_decay::{Complex64 as C, ModelConfig, Potential};

/// Root of a sign-changing `f` on a log scale.
fn log_bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let s = f(lo).signum();
    assert_ne!(s, f(hi).signum(), "no sign change on [{lo}, {hi}]");
    for _ in 0..80 {
        let m = (lo * hi).sqrt();
        if f(m).signum() == s {
            lo = m
        } else {
            hi = m
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn crossover_time_matches_the_asymptotic_estimate() {
    for (r, omega) in [(0.1, 1.5), (0.2, 1.5), (0.1, 1.8)] {
        let cfg = ModelConfig::u1(0.59, r, omega).unwrap();
        let pole = find_pole(&cfg, C::new(0.0, 0.0)).unwrap();
        let estimate = log_bisect(
            |t| {
                let head = (pole.xi0 * t).exp();
                let tail = theta_asymptotic(&cfg, &pole, t).unwrap() - head;
                (head.norm() / tail.norm()).ln()
            },
            10.0,
            1e7,
        );
        let dec = Decomposition::new(&cfg, &[estimate], &InversionOptions::decomposition()).unwrap();
        let full = log_bisect(
            |t| {
                let (p, c) = dec.split(t);
                (p.norm() / c.norm()).ln()
            },
            10.0,
            1e7,
        );
        assert!((full - estimate).abs() / full < 0.05, "r={r} w={omega}: {full} vs {estimate}");
    }
}

#[test]
fn stabilizing_frequency_keeps_the_state() {
    let ws = stabilizing_frequency(Potential::U1 { a: 0.59 }, 1.0, 1, (0.95, 2.0)).unwrap()[0].omega;
    // mean |theta|^2 over ten periods ending at t
    let mean_at = |omega: f64, t_end: f64| {
        let tr = volterra_survival(&ModelConfig::u1(0.59, 1.0, omega).unwrap(), t_end, 0.02).unwrap();
        let s = tr.survival();
        let n = (20.0 * std::f64::consts::PI / omega / 0.02) as usize;
        s[s.len() - n..].iter().sum::<f64>() / n as f64
    };
    let (early, late) = (mean_at(ws, 200.0), mean_at(ws, 400.0));
    assert!(late > 0.5, "{late}");
    assert!((early - late).abs() < 0.01 * late, "{early} -> {late}");
    assert!(mean_at(1.25, 400.0) < 1e-4);
}

#[test]
fn shallow_well_has_no_stabilization_point() {
    let u1 = Potential::U1 { a: 0.4 };
    assert!(stabilizing_frequency(u1, 1.0, 1, (0.95, 2.0)).unwrap().is_empty());
    assert!(stabilization_search(u1, 1.1, 1).unwrap().is_none());
}

#[test]
fn symmetric_pair_agrees_across_pipelines() {
    let cfg = ModelConfig::u2(0.8, 0.4, 1.3).unwrap();
    let ts: Vec<f64> = (1..=60).map(|i| 0.5 * i as f64).collect();
    let lap = invert_survival(&cfg, &ts).unwrap();
    let vol = volterra_survival(&cfg, 30.0, 0.005).unwrap();
    let (gap, at) = max_relative_gap(&lap, &vol, 1e-6);
    assert!(gap < 1e-3, "{gap:.2e} at t={at}");
}
